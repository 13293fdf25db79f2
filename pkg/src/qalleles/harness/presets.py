"""Named run configurations.

The selection functions, initial points and the epsilon of the figure presets
come from the worked examples this package reproduces. The values of r, kappa,
the time horizon and the grid are not given there; r = 40, kappa = 1 is the
smallest round pair with 4*sup|m| < r for x^2+y^2 on [-2,2]^2, and the other
choices are ours.
"""

_BASE = {
    "r": "40", "kappa": "1", "epsilon": "0.05",
    "x_min": "-2", "x_max": "2", "y_min": "-2", "y_max": "2",
    "nx": "101", "ny": "101", "t_max": "3", "mode": "haploid",
}

_FIG1_IC = "-0.3,1.3;0.7,-0.5"
_FIG2 = {"epsilon": "0.01", "sweep_count": "20", "sweep_box": "-2,2,-2,2", "seed": "20220101"}

PRESETS: dict[str, dict[str, str]] = {
    "example1": {**_BASE, "m": "x^2+y^2", "ic": "1,-0.5"},
    "example2": {**_BASE, "m": "(x+y)^2", "ic": "1,0"},
    "example3": {**_BASE, "m": "(1-x*y)^2", "ic": "0.5,1"},
    "fig1": {**_BASE, "m": "x^2+y^2", "ic": _FIG1_IC},
    "fig1_squared_sum": {**_BASE, "m": "(x+y)^2", "ic": _FIG1_IC},
    "fig1_hyperbola": {**_BASE, "m": "(1-x*y)^2", "ic": _FIG1_IC},
    "fig2_sum_sq": {**_BASE, **_FIG2, "m": "x^2+y^2", "ic": "0,0"},
    "fig2_squared_sum": {**_BASE, **_FIG2, "m": "(x+y)^2", "ic": "0,0"},
    "fig2_hyperbola": {**_BASE, **_FIG2, "m": "(1-x*y)^2", "ic": "0,0"},
    "diploid": {**_BASE, "m": "(x+y)^2", "mode": "diploid", "ic": "1,1"},
    # initial mass close to r/kappa so that the mass first decreases
    "bv": {**_BASE, "m": "x^2+y^2", "ic": "1,-0.5", "target_mass": "39.6", "t_max": "0.05",
           "sample_interval": "0.0025"},
}

DESCRIPTIONS = {
    "example1": "m = x^2+y^2 from (1,-0.5); dominant alleles decay like 1/(t+1)",
    "example2": "m = (x+y)^2 from (1,0); projection onto the line x+y=0",
    "example3": "m = (1-xy)^2 from (0.5,1); convergence to the hyperbola xy=1",
    "fig1": "two bumps at (-0.3,1.3), (0.7,-0.5) under x^2+y^2",
    "fig1_squared_sum": "two bumps under (x+y)^2",
    "fig1_hyperbola": "two bumps under (1-xy)^2",
    "fig2_sum_sq": "sweep of 20 uniform starts in [-2,2]^2, eps=0.01, x^2+y^2",
    "fig2_squared_sum": "sweep of 20 uniform starts, (x+y)^2",
    "fig2_hyperbola": "sweep of 20 uniform starts, (1-xy)^2",
    "diploid": "diploid reading, m = (x+y)^2 from (1,1)",
    "bv": "x^2+y^2 started near the upper mass bound (negative initial mass growth)",
}
