"""Evaluation of the partition-of-unity random-feature ansatz and its derivatives.

On element ``j`` the local basis is ``sigma(A_i . T_j(x) + B_i)`` with ``T_j`` the
affine map onto [-1, 1]^d. The PoU weight is piecewise constant, so derivatives
never act on it.
"""

import numpy as np

from piranns.activation import TANH_DIFF
from piranns.sampling import SAMPLERS, element_seed


def _as_deriv(deriv, dim):
    if deriv is None or deriv == 0:
        return (0,) * dim
    deriv = tuple(int(v) for v in deriv)
    if len(deriv) != dim or min(deriv) < 0:
        raise ValueError(f"bad derivative multi-index {deriv} for dimension {dim}")
    return deriv


def axis_deriv(dim, *axes):
    """Multi-index with one unit per listed axis, e.g. ``axis_deriv(2, 0, 0)`` is d^2/dx0^2."""
    out = [0] * dim
    for k in axes:
        out[k] += 1
    return tuple(out)


class FeatureSet:
    """Hidden-layer parameters on the reference element, shared or per element.

    ``mode="shared"`` reuses one parameter set on every element. ``mode="independent"``
    takes an explicit ``{element_id: FeatureParams}`` map or, when ``params`` is
    omitted, draws fresh parameters per element with seed ``seed ^ element_id``.
    """

    def __init__(self, mode="shared", params=None, *, domain=None, n=None, seed=0,
                 sampler="uniform", activation=TANH_DIFF):
        if mode not in ("shared", "independent"):
            raise ValueError(f"unknown feature mode {mode!r}")
        if sampler not in SAMPLERS:
            raise ValueError(f"unknown sampler {sampler!r}")
        self.mode = mode
        self.activation = activation
        self.domain = domain
        self.seed = int(seed)
        self.sampler = sampler
        self._n_request = n
        self._explicit = None
        self._cache = {}
        self._effective = {}
        if mode == "shared":
            if params is None:
                if domain is None or n is None:
                    raise ValueError("shared mode needs params or (domain, n)")
                params = SAMPLERS[sampler](domain, n, self.seed)
            self._shared = params
            self.n_features = params.n
            self.dim = params.dim
        else:
            self._shared = None
            if params is not None:
                self._explicit = dict(params)
                sizes = {p.n for p in self._explicit.values()}
                if len(sizes) != 1:
                    raise ValueError("independent parameter sets must all have the same size")
                first = next(iter(self._explicit.values()))
                self.n_features, self.dim = first.n, first.dim
            else:
                if domain is None or n is None:
                    raise ValueError("independent mode needs params or (domain, n)")
                probe = self.params_for(0)
                self.n_features, self.dim = probe.n, probe.dim

    def params_for(self, j):
        if self._shared is not None:
            return self._shared
        if self._explicit is not None:
            try:
                return self._explicit[j]
            except KeyError:
                raise ValueError(f"no parameters for element {j}") from None
        if j not in self._cache:
            p = SAMPLERS[self.sampler](self.domain, self._n_request, element_seed(self.seed, j))
            self._cache[j] = p
        return self._cache[j]

    def effective(self, part, j):
        """Physical-coordinate directions and biases on element ``j``."""
        e = part.element(j)
        key = (j, e.lo, e.hi)
        if key not in self._effective:
            params = self.params_for(j)
            self._effective[key] = part.affine(j).effective(params.a, params.b)
        return self._effective[key]

    def _check_points(self, part, j, x):
        e = part.element(j)
        tol = 1e-12 * e.diam
        if np.any(x < np.array(e.lo) - tol) or np.any(x > np.array(e.hi) + tol):
            raise ValueError(f"point outside the closure of element {j}")

    def activations(self, part, j, x, max_order=2, check=True):
        """Activation derivatives ``[sigma^(k)(Z)]`` (each (P, N)) and effective directions (N, d)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if check:
            self._check_points(part, j, x)
        a_eff, b_eff = self.effective(part, j)
        z = x @ a_eff.T + b_eff
        return self.activation.stack(z, max_order), a_eff

    def basis(self, part, j, x, deriv=None, check=True):
        """The ``deriv``-partial of every local basis function at points ``x``.

        Returns (P, N) for a (P, d) array of points or (N,) for a single point.
        The PoU weight is not applied.
        """
        single = np.ndim(x) == 1
        x = np.atleast_2d(np.asarray(x, dtype=float))
        alpha = _as_deriv(deriv, x.shape[1])
        order = sum(alpha)
        if order > 3:
            raise ValueError("derivatives above third order are not available")
        if check:
            self._check_points(part, j, x)
        a_eff, b_eff = self.effective(part, j)
        z = x @ a_eff.T + b_eff
        out = self.activation.eval(z, order)
        factor = np.prod(a_eff ** np.array(alpha), axis=1)
        out = out * factor
        return out[0] if single else out


class Coefficients:
    """Output weights keyed by active element id.

    Real problems store a vector (N,) per element; complex problems store the
    real and imaginary parts stacked as (2, N).
    """

    def __init__(self, w, is_complex=False):
        self.w = {int(j): np.asarray(v, dtype=float) for j, v in w.items()}
        self.is_complex = bool(is_complex)

    @classmethod
    def zeros(cls, part, n, is_complex=False):
        shape = (2, n) if is_complex else (n,)
        return cls({j: np.zeros(shape) for j in part.active}, is_complex)

    @classmethod
    def from_vector(cls, part, n, vec, is_complex=False):
        """Unpack a solution vector with columns ordered by (active element, feature).

        Complex unknowns are ordered as all real blocks followed by all imaginary blocks.
        """
        vec = np.asarray(vec, dtype=float)
        m = len(part.active) * n
        if vec.shape != ((2 * m,) if is_complex else (m,)):
            raise ValueError(f"solution vector has shape {vec.shape}, expected {2 * m if is_complex else m}")
        w = {}
        for col, j in enumerate(part.active):
            blk = slice(col * n, (col + 1) * n)
            w[j] = np.stack([vec[blk], vec[m:][blk]]) if is_complex else vec[blk]
        return cls(w, is_complex)

    def to_vector(self, part):
        blocks = [self.w[j] for j in part.active]
        if self.is_complex:
            return np.concatenate([b[0] for b in blocks] + [b[1] for b in blocks])
        return np.concatenate(blocks)

    def local(self, j):
        v = self.w[j]
        return v[0] + 1j * v[1] if self.is_complex else v

    def scaled(self, c):
        return Coefficients({j: c * v for j, v in self.w.items()}, self.is_complex)

    def keys_match(self, part):
        return set(self.w) == set(part.active)


def local_ansatz(fs, part, coef, j, x, deriv=None, check=True):
    """The pure local expansion on element ``j`` (PoU weight taken as 1)."""
    return fs.basis(part, j, np.atleast_2d(x), deriv, check) @ coef.local(j).T


def eval_ansatz(fs, part, coef, x, deriv=None):
    """Evaluate the PoU ansatz (or a derivative) at points ``x`` of shape (P, d).

    On element interfaces the one-sided local values are averaged with the
    PoU weights ``1 / #I(x)``.
    """
    single = np.ndim(x) == 1
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if not np.all(part.domain.contains(x)):
        raise ValueError("point outside the closed domain")
    weights = part.pou_weights(x)
    out = np.zeros(x.shape[0], dtype=complex if coef.is_complex else float)
    for col, j in enumerate(part.active):
        rows = np.flatnonzero(weights[:, col])
        if rows.size:
            out[rows] += weights[rows, col] * local_ansatz(fs, part, coef, j, x[rows], deriv, check=False)
    return out[0] if single else out


def jump_on_face(fs, part, coef, face, x, deriv=None, problem=None, normal_ok=False):
    """Jump of the ansatz (or of a first derivative) at points ``x`` on ``face``.

    Interior faces give left minus right one-sided local values. Boundary faces
    give the local value minus the boundary datum from ``problem``. Derivatives
    must be tangential unless ``normal_ok`` is set (interior faces only).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    alpha = _as_deriv(deriv, x.shape[1])
    if sum(alpha) > 1:
        raise ValueError("face jumps support derivatives of order at most one")
    along_normal = alpha[face.normal_axis] == 1
    if along_normal and (face.kind != "interior" or not normal_ok):
        raise ValueError("derivative along the face normal is not a tangential derivative")
    left = local_ansatz(fs, part, coef, face.left, x, alpha)
    if face.kind == "interior":
        return left - local_ansatz(fs, part, coef, face.right, x, alpha)
    if problem is None:
        raise ValueError("boundary jumps need the problem's boundary data")
    if sum(alpha) == 0:
        return left - problem.g(x, face)
    axis = alpha.index(1)
    return left - problem.g_grad(x, face)[:, axis]
