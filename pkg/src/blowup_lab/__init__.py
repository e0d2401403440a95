"""Blow-up of y^(d+1) = y y^(d): integration, series, time changes,
Lotka-Volterra dynamics, Lyapunov feasibility and Poissonian burning."""
from .ode_blowup import (T_D1, BlowupEstimate, DerivativeJet, IntegratorConfig, Trajectory,
                         analytic_d1, estimate_blowup_shooting, integrate)
from .series import estimate_blowup_series, taylor_coefficients
from .lv_dynamics import LVModel, simulate
from .lyapunov_feasibility import build_matrix, leading_minors_exact, search_lambda

__all__ = [
    "T_D1", "BlowupEstimate", "DerivativeJet", "IntegratorConfig", "Trajectory",
    "analytic_d1", "estimate_blowup_shooting", "integrate",
    "estimate_blowup_series", "taylor_coefficients",
    "LVModel", "simulate", "build_matrix", "leading_minors_exact", "search_lambda",
]
