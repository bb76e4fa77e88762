"""The engine module holds the numerical layers: kernel, filter, calibration, surfaces,
dependence, pricing, quoting and the forecasting benchmark.
"""
from . import baselines as engine_baselines
from . import dependence as engine_dependence
from . import em as engine_em
from . import filtering as engine_filtering
from . import forecast as engine_forecast
from . import greeks as engine_greeks
from . import kernel as engine_kernel
from . import montecarlo as engine_montecarlo
from . import pide as engine_pide
from . import pricing as engine_pricing
from . import quoting as engine_quoting
from . import scenario as engine_scenario
from . import surface as engine_surface
