"""Decision tree, random forest and SVM classifiers over binary permission features."""
