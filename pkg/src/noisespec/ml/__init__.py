"""From-scratch ML models: random forest, kernel SVR, feed-forward net."""
