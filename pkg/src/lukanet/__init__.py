"""Łukasiewicz-logic networks: compile formulas, learn from truth tables, extract rules."""
