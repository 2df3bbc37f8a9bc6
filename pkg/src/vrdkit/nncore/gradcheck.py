"""Central finite-difference verification of taped gradients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Parameter, zero_grads


class GradCheckError(AssertionError):
    """Analytic and finite-difference gradients disagree beyond tolerance."""


@dataclass
class GradCheckReport:
    max_rel_error: float = 0.0
    checked: int = 0
    worst: list[tuple[str, int, float, float, float]] = field(default_factory=list)
    # worst rows: (param name, flat index, analytic, finite difference, rel error)

    def summary(self) -> str:
        lines = [f"grad check: {self.checked} coords, max rel error {self.max_rel_error:.3e}"]
        for name, idx, a, f, rel in self.worst[:8]:
            lines.append(f"  {name}[{idx}]: analytic={a:.6e} fd={f:.6e} rel={rel:.3e}")
        return "\n".join(lines)


def _rel_error(a: float, f: float) -> float:
    # Floor the denominator so near-zero gradients are judged on absolute
    # error (|a-f| < tol * 0.01) instead of blowing up the ratio; central
    # differences in float64 carry ~1e-9 absolute noise.
    return abs(a - f) / max(abs(a), abs(f), 1e-2)


def grad_check(
    loss_fn,
    params,
    fd_eps: float = 1e-5,
    tol: float = 1e-4,
    max_coords_per_param: int = 6,
    rng_seed: int = 0,
) -> GradCheckReport:
    """Compare analytic gradients of loss_fn() against central finite differences.

    loss_fn must be deterministic (dropout disabled) and must read the live
    Parameter objects in `params` each call. Coordinates are sampled per
    parameter for large tensors. Raises GradCheckError above tol.
    """
    param_list = list(params.values() if isinstance(params, dict) else params)
    for p in param_list:
        if not isinstance(p, Parameter):
            raise TypeError("grad_check expects Parameter instances")
    zero_grads(param_list)
    loss = loss_fn()
    loss.backward()
    analytic = {p.name: (np.zeros_like(p.data) if p.grad is None else p.grad.copy()) for p in param_list}
    zero_grads(param_list)

    rng = np.random.Generator(np.random.PCG64(rng_seed))
    report = GradCheckReport()
    rows = []
    for p in param_list:
        size = p.data.size
        if size <= max_coords_per_param:
            coords = np.arange(size)
        else:
            coords = rng.choice(size, size=max_coords_per_param, replace=False)
        flat = p.data.reshape(-1)
        for idx in coords:
            idx = int(idx)
            saved = flat[idx]
            flat[idx] = saved + fd_eps
            f_plus = float(loss_fn().data)
            flat[idx] = saved - fd_eps
            f_minus = float(loss_fn().data)
            flat[idx] = saved
            fd = (f_plus - f_minus) / (2.0 * fd_eps)
            a = float(analytic[p.name].reshape(-1)[idx])
            rel = _rel_error(a, fd)
            rows.append((rel, p.name, idx, a, fd))
            report.checked += 1
    rows.sort(reverse=True)
    report.max_rel_error = rows[0][0] if rows else 0.0
    report.worst = [(name, idx, a, f, rel) for rel, name, idx, a, f in rows[:16]]
    if report.max_rel_error > tol:
        raise GradCheckError(report.summary())
    return report
