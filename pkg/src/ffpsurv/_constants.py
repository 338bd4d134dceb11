"""Numeric constants shared by the chain update and both kernel backends."""

import math

# Event updates switch to the limiting forms near the ends of the epsilon
# range, where the general moment-matched expressions lose precision.
EPS_SMALL = 1e-4
EPS_LARGE = 1.0 - 1e-8

# Spell likelihoods are floored here before taking logs, so line searches
# survive wild intermediate parameter values; floored spells are counted.
LIK_FLOOR = 1e-300
LOG_LIK_FLOOR = math.log(LIK_FLOOR)
