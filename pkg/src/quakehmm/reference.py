"""Reference parameter sets for M >= 4 mainshock interevent times, used as
simulation ground truth and in examples.

Rows of the rounded estimates that do not sum exactly to one are rescaled.
"""
from .hmm import HmmParams

#: Two-state time-only model fitted to 1932-1964; state 1 short, state 2 long.
TWO_STATE = HmmParams.renormalized(
    pi=[0.0, 1.0],
    trans=[[0.446, 0.554],
           [0.040, 0.960]],
    means=[1.4, 21.1],
)

#: Four-state East/West model; states are (short, East), (long, East),
#: (short, West), (long, West) and region 1 is East.
EAST_WEST = HmmParams.renormalized(
    pi=[0.0, 0.0, 1.0, 0.0],
    trans=[[0.512, 0.475, 0.013, 0.0],
           [0.041, 0.0, 0.372, 0.587],
           [0.032, 0.031, 0.625, 0.311],
           [0.005, 0.117, 0.733, 0.145]],
    means=[2.02, 21.59, 5.12, 22.82],
    region_dist=[[1.0, 0.0],
                 [0.88, 0.12],
                 [0.0, 1.0],
                 [0.08, 0.92]],
)
