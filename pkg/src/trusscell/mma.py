"""Method of moving asymptotes with a primal-dual interior-point subsolver.

Implements the standard asymptote update (init 0.5 of the range, adapt by
1.2/0.7 on oscillation sign) and the dual Newton subproblem solve. Asymptote
arithmetic always uses the global [0, 1] design box; per-iteration move-limit
boxes enter only through the subproblem bounds alfa/beta, so shrinking move
limits cannot collapse the asymptotes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

Array = NDArray[np.float64]


class MmaSubproblemError(RuntimeError):
    """Interior-point subsolver stalled; carries the final residuals."""

    def __init__(self, residumax: float, residunorm: float):
        super().__init__(f"MMA subproblem did not converge: max residual {residumax:.3e}, norm {residunorm:.3e}")
        self.residumax = residumax
        self.residunorm = residunorm


@dataclass
class MmaParams:
    asyinit: float = 0.5
    asyincr: float = 1.2
    asydecr: float = 0.7
    albefa: float = 0.1
    raa0: float = 1e-5
    epsimin: float = 1e-9
    a0: float = 1.0
    c_coeff: float = 1000.0
    d_coeff: float = 1.0


@dataclass
class MmaState:
    """Asymptotes and iterate history for one optimization run."""

    n: int
    xmin: Array = field(init=False)
    xmax: Array = field(init=False)
    low: Array = field(init=False)
    upp: Array = field(init=False)
    xold1: Array | None = None
    xold2: Array | None = None
    epoch: int = 0
    params: MmaParams = field(default_factory=MmaParams)

    def __post_init__(self) -> None:
        self.xmin = np.zeros(self.n)
        self.xmax = np.ones(self.n)
        self.low = self.xmin.copy()
        self.upp = self.xmax.copy()


def apply_move_limits(z: Array, move: float) -> tuple[Array, Array]:
    """Box [max(0, z - move), min(1, z + move)] around the current iterate."""
    return np.clip(z - move, 0.0, 1.0), np.clip(z + move, 0.0, 1.0)


def mma_update(
    state: MmaState,
    x: Array,
    df0dx: Array,
    g: Array,
    dgdx: Array,
    lower: Array,
    upper: Array,
) -> Array:
    """One MMA step: build the separable subproblem at x and solve it.

    g/dgdx hold the constraints in g <= 0 form, shape (m,) and (m, n); an
    unconstrained call (m = 0) gets one inactive dummy constraint so the
    subsolver keeps its shape. Asymptotes are guaranteed to strictly bracket
    [alfa, beta] by construction.
    """
    p = state.params
    n = state.n
    g = np.atleast_1d(np.asarray(g, dtype=float))
    dgdx = np.asarray(dgdx, dtype=float).reshape(len(g), n) if g.size else np.zeros((0, n))
    if g.size == 0:
        g = np.array([-1.0])
        dgdx = np.zeros((1, n))
    m = len(g)

    state.epoch += 1
    xrange = state.xmax - state.xmin
    if state.epoch <= 2 or state.xold1 is None or state.xold2 is None:
        state.low = x - p.asyinit * xrange
        state.upp = x + p.asyinit * xrange
    else:
        osc = (x - state.xold1) * (state.xold1 - state.xold2)
        factor = np.ones(n)
        factor[osc > 0] = p.asyincr
        factor[osc < 0] = p.asydecr
        state.low = x - factor * (state.xold1 - state.low)
        state.upp = x + factor * (state.upp - state.xold1)
        state.low = np.clip(state.low, x - 10.0 * xrange, x - 0.01 * xrange)
        state.upp = np.clip(state.upp, x + 0.01 * xrange, x + 10.0 * xrange)

    alfa = np.maximum(state.low + p.albefa * (x - state.low), lower)
    beta = np.minimum(state.upp - p.albefa * (state.upp - x), upper)

    xmami = np.maximum(state.xmax - state.xmin, 1e-5)
    ux1 = state.upp - x
    xl1 = x - state.low
    dfp = np.maximum(df0dx, 0.0)
    dfm = np.maximum(-df0dx, 0.0)
    reg0 = 0.001 * (dfp + dfm) + p.raa0 / xmami
    p0 = (dfp + reg0) * ux1**2
    q0 = (dfm + reg0) * xl1**2
    dgp = np.maximum(dgdx, 0.0)
    dgm = np.maximum(-dgdx, 0.0)
    regc = 0.001 * (dgp + dgm) + p.raa0 / xmami[None, :]
    P = (dgp + regc) * ux1[None, :] ** 2
    Q = (dgm + regc) * xl1[None, :] ** 2
    b = P @ (1.0 / ux1) + Q @ (1.0 / xl1) - g

    a_lin = np.zeros(m)
    c_lin = np.full(m, p.c_coeff)
    d_lin = np.full(m, p.d_coeff)
    xnew = _subsolv(m, n, p.epsimin, state.low, state.upp, alfa, beta, p0, q0, P, Q, p.a0, a_lin, b, c_lin, d_lin)

    state.xold2 = state.xold1
    state.xold1 = x.copy()
    return xnew


def _subsolv(m, n, epsimin, low, upp, alfa, beta, p0, q0, P, Q, a0, a, b, c, d) -> Array:
    """Primal-dual Newton solve of the separable convex subproblem."""
    een = np.ones(n)
    eem = np.ones(m)
    x = 0.5 * (alfa + beta)
    y = eem.copy()
    z = 1.0
    lam = eem.copy()
    xsi = np.maximum(een / (x - alfa), een)
    eta = np.maximum(een / (beta - x), een)
    mu = np.maximum(eem, 0.5 * c)
    zet = 1.0
    s = eem.copy()
    epsi = 1.0

    def residuals(x, y, z, lam, xsi, eta, mu, zet, s, epsi):
        ux1 = upp - x
        xl1 = x - low
        plam = p0 + P.T @ lam
        qlam = q0 + Q.T @ lam
        gvec = P @ (1.0 / ux1) + Q @ (1.0 / xl1)
        rex = plam / ux1**2 - qlam / xl1**2 - xsi + eta
        rey = c + d * y - mu - lam
        rez = a0 - zet - a @ lam
        relam = gvec - a * z - y + s - b
        rexsi = xsi * (x - alfa) - epsi
        reeta = eta * (beta - x) - epsi
        remu = mu * y - epsi
        rezet = zet * z - epsi
        res = lam * s - epsi
        residu = np.concatenate([rex, rey, [rez], relam, rexsi, reeta, remu, [rezet], res])
        return np.linalg.norm(residu), np.max(np.abs(residu))

    residunorm, residumax = residuals(x, y, z, lam, xsi, eta, mu, zet, s, epsi)
    while epsi > epsimin:
        residunorm, residumax = residuals(x, y, z, lam, xsi, eta, mu, zet, s, epsi)
        ittt = 0
        while residumax > 0.9 * epsi and ittt < 500:
            ittt += 1
            ux1 = upp - x
            xl1 = x - low
            ux2 = ux1**2
            xl2 = xl1**2
            plam = p0 + P.T @ lam
            qlam = q0 + Q.T @ lam
            gvec = P @ (1.0 / ux1) + Q @ (1.0 / xl1)
            GG = P / ux2[None, :] - Q / xl2[None, :]
            delx = plam / ux2 - qlam / xl2 - epsi / (x - alfa) + epsi / (beta - x)
            dely = c + d * y - lam - epsi / y
            delz = a0 - a @ lam - epsi / z
            dellam = gvec - a * z - y - b + epsi / lam
            diagx = 2.0 * (plam / (ux2 * ux1) + qlam / (xl2 * xl1)) + xsi / (x - alfa) + eta / (beta - x)
            diagy = d + mu / y
            diaglamyi = s / lam + 1.0 / diagy

            if m < n:
                blam = dellam + dely / diagy - GG @ (delx / diagx)
                Alam = np.diag(diaglamyi) + (GG / diagx[None, :]) @ GG.T
                AA = np.block([[Alam, a[:, None]], [a[None, :], np.array([[-zet / z]])]])
                solut = np.linalg.solve(AA, np.concatenate([blam, [delz]]))
                dlam = solut[:m]
                dz = solut[m]
                dx = -delx / diagx - (GG.T @ dlam) / diagx
            else:
                diaglamyiinv = 1.0 / diaglamyi
                dellamyi = dellam + dely / diagy
                Axx = np.diag(diagx) + (GG.T * diaglamyiinv[None, :]) @ GG
                azz = zet / z + a @ (a * diaglamyiinv)
                axz = -GG.T @ (a * diaglamyiinv)
                bx = delx + GG.T @ (dellamyi * diaglamyiinv)
                bz = delz - a @ (dellamyi * diaglamyiinv)
                AA = np.block([[Axx, axz[:, None]], [axz[None, :], np.array([[azz]])]])
                solut = np.linalg.solve(AA, np.concatenate([-bx, [-bz]]))
                dx = solut[:n]
                dz = solut[n]
                dlam = (GG @ dx) * diaglamyiinv - dz * (a * diaglamyiinv) + dellamyi * diaglamyiinv

            dy = -dely / diagy + dlam / diagy
            dxsi = -xsi + epsi / (x - alfa) - (xsi * dx) / (x - alfa)
            deta = -eta + epsi / (beta - x) + (eta * dx) / (beta - x)
            dmu = -mu + epsi / y - (mu * dy) / y
            dzet = -zet + epsi / z - zet * dz / z
            ds = -s + epsi / lam - (s * dlam) / lam
            xx = np.concatenate([y, [z], lam, xsi, eta, mu, [zet], s])
            dxx = np.concatenate([dy, [dz], dlam, dxsi, deta, dmu, [dzet], ds])

            stepxx = np.max(-1.01 * dxx / xx)
            stepalfa = np.max(-1.01 * dx / (x - alfa))
            stepbeta = np.max(1.01 * dx / (beta - x))
            steg = 1.0 / max(stepxx, stepalfa, stepbeta, 1.0)

            xold, yold, zold = x.copy(), y.copy(), z
            lamold, xsiold, etaold = lam.copy(), xsi.copy(), eta.copy()
            muold, zetold, sold = mu.copy(), zet, s.copy()
            resinorm = residunorm
            for _ in range(50):
                x = xold + steg * dx
                y = yold + steg * dy
                z = zold + steg * dz
                lam = lamold + steg * dlam
                xsi = xsiold + steg * dxsi
                eta = etaold + steg * deta
                mu = muold + steg * dmu
                zet = zetold + steg * dzet
                s = sold + steg * ds
                residunorm, residumax = residuals(x, y, z, lam, xsi, eta, mu, zet, s, epsi)
                if residunorm < resinorm:
                    break
                steg *= 0.5
        epsi *= 0.1
    if residumax > 1e-5:
        raise MmaSubproblemError(residumax, residunorm)
    return x
