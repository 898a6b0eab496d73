"""Named benchmark-study presets runnable from the command line.

Each preset sweeps one design parameter and fixes the rest; n_rep, seed, and
thread count are run-time options, not part of the preset.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .simulate import InformativeSampleSize, LatentClusters, PopAverage

_AREA_METHODS = ["eblup_mle", "eblup_reml", "eblup_ure", "obp", "cbp", "cbp_plugin"]
_AREA_METHODS_MT = _AREA_METHODS + ["cbp_multitau"]
_POP_METHODS = [
    "eblup_reml",
    "obp",
    "cbp",
    "cbp_plugin",
    "direct",
    "minvar",
    "direct_compromise",
    "spline",
]

_RHO_GRID = [-0.9, -0.6, -0.3, 0.0, 0.3, 0.6, 0.9]


@dataclass(frozen=True)
class Preset:
    name: str
    sweep: str                      # parameter varied across settings
    settings: tuple                 # ((setting dict, design), ...)
    methods: tuple


def _latent_sweep(name, sweep, values, **fixed):
    settings = []
    for v in values:
        design = LatentClusters(**{**fixed, sweep: v})
        settings.append(({sweep: v, **fixed}, design))
    return Preset(name=name, sweep=sweep, settings=tuple(settings),
                  methods=tuple(_AREA_METHODS))


def _iss_sweep(name, methods, **fixed):
    settings = []
    for rho in _RHO_GRID:
        design = InformativeSampleSize(rho=rho, **fixed)
        settings.append(({"rho": rho, **fixed}, design))
    return Preset(name=name, sweep="rho", settings=tuple(settings),
                  methods=tuple(methods))


def _table1():
    settings = []
    for k in (10, 50):
        for sigma2 in (1.0, 4.0):
            for rho in (0.0, 0.1, 0.2, 0.3, 0.4, 0.5):
                design = PopAverage(k=k, sigma2=sigma2, rho=rho)
                settings.append(
                    ({"k": k, "sigma2": sigma2, "rho": rho}, design)
                )
    return Preset(name="table1", sweep="rho", settings=tuple(settings),
                  methods=tuple(_POP_METHODS))


def _build():
    presets = {}
    presets["fig1a"] = _latent_sweep(
        "fig1a", "k", [5, 10, 15, 20, 25, 30, 35, 40, 45, 50], beta1=1.0
    )
    presets["fig1b"] = _latent_sweep(
        "fig1b", "beta1", [0.0, 1.0, 2.0, 3.0, 4.0, 5.0], k=30
    )
    presets["fig2a"] = _latent_sweep(
        "fig2a", "n_irrelevant", [0, 2, 4, 6, 8, 10, 12], k=50, beta1=2.0
    )
    presets["fig2b"] = _latent_sweep(
        "fig2b", "n_irrelevant", [0, 2, 4, 6, 8, 10, 12], k=50, beta1=0.5
    )
    presets["fig3a"] = _iss_sweep("fig3a", _AREA_METHODS, k=50, sigma2=0.5)
    presets["fig3b"] = _iss_sweep("fig3b", _AREA_METHODS, k=50, sigma2=1.5)
    presets["fig4a"] = _iss_sweep(
        "fig4a", _AREA_METHODS_MT, k=50, sigma2=1.0, v_dist="mixture"
    )
    presets["fig4b"] = _iss_sweep(
        "fig4b", _AREA_METHODS_MT, k=50, sigma2=1.0, v_dist="uniform"
    )
    presets["table1"] = _table1()
    return presets


PRESETS = _build()


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(
            f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}"
        ) from None
