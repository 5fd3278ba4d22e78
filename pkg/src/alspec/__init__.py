"""Application layer specifications: terms, HTTP rules, rule composition,
transition-system exploration and a state/event temporal logic."""
