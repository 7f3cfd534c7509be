# sg_traffic/defaults.py
# Reference Riemann test: uncertain congested left state, deterministic right state.

BASELINE_INTERVAL = (0.0, 2.0)
BASELINE_CELLS = 200
BASELINE_FINAL_TIME = 1.0
BASELINE_ORDER = 15
BASELINE_FAMILY = "haar"
BASELINE_LEFT_LAW = (0.75, 0.95)
BASELINE_RIGHT_STATE = 0.2
BASELINE_DISCONTINUITY = 1.0

RIGHT_STATE_SWEEP = tuple(round(0.05 * i, 2) for i in range(21))
VEHICLE_COUNTS = (100, 200, 400)
RELAXATION_TIMES = (1e-1, 1e-2, 1e-3)
CONVERGENCE_ORDERS = (3, 7, 15)

BASELINE_CONFIG = """
# reference Riemann problem for the stochastic LWR model
basis.family = haar
basis.K = 15

model.type = lwr
model.velocity = greenshields

grid.a = 0
grid.b = 2
grid.N_x = 200
grid.T_f = 1
grid.cfl = 0.45
grid.boundary = outflow

initial.kind = riemann
initial.u1 = 0.75
initial.u2 = 0.95
initial.rho_r = 0.2
initial.discontinuity = 1

output.snapshot_times = 0.5, 1
"""

FD_SCAN_CONFIG = (
    BASELINE_CONFIG
    + """
experiment.kind = fdscan
experiment.rho_r_list = """
    + ", ".join(f"{value:g}" for value in RIGHT_STATE_SWEEP)
    + "\n"
)

MC_COMPARE_CONFIG = (
    BASELINE_CONFIG
    + """
experiment.kind = mccompare
experiment.M = 1000
experiment.K_list = """
    + ", ".join(str(order) for order in CONVERGENCE_ORDERS)
    + "\n"
)
