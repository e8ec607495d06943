import json
import dataclasses
import numpy as np
import scipy.linalg

from scipy.special import betainc

from predix.core.array import as_vector
from predix.core.array import check_finite
from predix.core.array import check_equal_length
from predix.core.array import zscore
from predix.io.utils import ensure_parent


# names of the four interaction-model coefficients, in design-matrix order
coefficient_names = ('intercept', 'treatment', 'candidate', 'interaction')

# absolute residual threshold (per sample) below which a fit counts as perfect
zero_residual_tolerance = 1e-12


class RegressionReport:

    def __init__(self, beta, se, t, p, dof, rss, rank_deficient=False, zero_residual=False, fitted=None):
        """
        Result of the treatment-interaction regression

            Y ~ b0 + bT * T + bc * c + bcT * c * T

        for a biomarker candidate c. Coefficient vectors are ordered as
        (intercept, treatment, candidate, interaction).

        Parameters
        ----------
        beta, se, t, p : array_like
            Coefficients, standard errors, t-values and two-sided p-values.
        dof : int
            Residual degrees of freedom, n - 4.
        rss : float
            Residual sum of squares.
        rank_deficient : bool
            The design matrix does not have full column rank. Coefficient
            statistics are NaN.
        zero_residual : bool
            The fit is perfect. t-values are +inf sentinels and p-values zero.
        fitted : array_like, optional
            Fitted outcome values (not serialized).
        """
        self.beta = np.asarray(beta, dtype=np.float64)
        self.se = np.asarray(se, dtype=np.float64)
        self.t = np.asarray(t, dtype=np.float64)
        self.p = np.asarray(p, dtype=np.float64)
        self.dof = int(dof)
        self.rss = float(rss)
        self.rank_deficient = bool(rank_deficient)
        self.zero_residual = bool(zero_residual)
        self.fitted = None if fitted is None else np.asarray(fitted, dtype=np.float64)

    def __repr__(self):
        flags = [k for k, v in self.flags.items() if v]
        desc = f', flags={flags}' if flags else ''
        return f'RegressionReport(t_pred={self.t[3]:.4g}, t_prog={self.t[2]:.4g}, dof={self.dof}{desc})'

    @property
    def flags(self):
        return {'rank_deficient': self.rank_deficient, 'zero_residual': self.zero_residual}

    @property
    def degenerate(self):
        return self.rank_deficient or self.zero_residual

    def coefficient(self, name):
        """
        Statistics (beta, se, t, p) of a named coefficient.
        """
        index = coefficient_names.index(name)
        return self.beta[index], self.se[index], self.t[index], self.p[index]

    def to_dict(self):
        def values(arr):
            return [None if np.isnan(v) else float(v) for v in arr]
        return {
            'coefficients': list(coefficient_names),
            'beta': values(self.beta),
            'se': values(self.se),
            't': values(self.t),
            'p': values(self.p),
            'dof': self.dof,
            'rss': None if np.isnan(self.rss) else self.rss,
            'flags': self.flags,
        }

    @classmethod
    def from_dict(cls, content):
        def values(lst):
            return [np.nan if v is None else v for v in lst]
        return cls(values(content['beta']), values(content['se']), values(content['t']),
                   values(content['p']), content['dof'],
                   np.nan if content['rss'] is None else content['rss'],
                   **content['flags'])

    def save(self, filename):
        """
        Write the report as JSON. Infinite t-value sentinels are written as Infinity.
        """
        ensure_parent(filename)
        with open(filename, 'w') as file:
            json.dump(self.to_dict(), file, indent=2)


def _degenerate_report(n):
    nan = np.full(4, np.nan)
    return RegressionReport(nan, nan, nan, nan, n - 4, np.nan, rank_deficient=True)


def student_t_pvalue(t, dof):
    """
    Two-sided p-value of a Student t statistic, computed through the regularized
    incomplete beta function.
    """
    t = np.asarray(t, dtype=np.float64)
    return betainc(0.5 * dof, 0.5, dof / (dof + t * t))


def fit_interaction_ols(candidate, T, Y, standardize=True):
    """
    Fit the treatment-interaction regression of outcomes on a biomarker candidate
    with ordinary least squares.

    The design matrix has columns [1, T, c, c * T]. It is solved with a column-pivoted
    QR factorization, and rank deficiency (for example a constant candidate or a
    single treatment arm) is flagged in the report rather than papered over with a
    pseudo-inverse. Standard errors use the residual variance RSS / (n - 4).

    Parameters
    ----------
    candidate : (n,) array_like
        Biomarker candidate values.
    T : (n,) array_like
        Binary treatment indicators.
    Y : (n,) array_like
        Outcomes.
    standardize : bool
        Z-score the candidate before factorization for numerical conditioning. The
        reported coefficients are transformed back to the original candidate scale.

    Returns
    -------
    RegressionReport
    """
    candidate = as_vector(candidate, name='candidate')
    T = as_vector(T, name='T')
    Y = as_vector(Y, name='Y')
    check_equal_length(candidate=candidate, T=T, Y=Y)
    n = len(Y)
    if n < 5:
        raise ValueError(f'interaction regression needs at least 5 samples, but got {n}')
    for name, vec in (('candidate', candidate), ('T', T), ('Y', Y)):
        check_finite(vec, name=name)
    if not np.all((T == 0) | (T == 1)):
        raise ValueError('treatment indicators must be 0 or 1')

    if standardize:
        scaled, mean, std = zscore(candidate)
        if std == 0:
            return _degenerate_report(n)
    else:
        scaled, mean, std = candidate, 0.0, 1.0

    X = np.column_stack([np.ones(n), T, scaled, scaled * T])
    Q, R, pivot = scipy.linalg.qr(X, mode='economic', pivoting=True)
    diag = np.abs(np.diag(R))
    tolerance = diag[0] * max(n, 4) * np.finfo(np.float64).eps
    if diag[0] == 0 or np.count_nonzero(diag > tolerance) < 4:
        return _degenerate_report(n)

    # coefficients and unscaled covariance in pivoted order
    solved = scipy.linalg.solve_triangular(R, Q.T @ Y)
    Rinv = scipy.linalg.solve_triangular(R, np.eye(4))
    beta = np.empty(4)
    beta[pivot] = solved
    unscaled = np.empty((4, 4))
    unscaled[np.ix_(pivot, pivot)] = Rinv @ Rinv.T

    fitted = X @ beta
    residuals = Y - fitted
    rss = float(residuals @ residuals)

    # map coefficients of the standardized candidate back to the original scale
    A = np.array([
        [1.0, 0.0, -mean / std, 0.0],
        [0.0, 1.0, 0.0, -mean / std],
        [0.0, 0.0, 1.0 / std, 0.0],
        [0.0, 0.0, 0.0, 1.0 / std],
    ])
    beta = A @ beta
    unscaled = A @ unscaled @ A.T

    dof = n - 4
    se = np.sqrt(rss / dof * np.diag(unscaled))

    if rss < zero_residual_tolerance * n:
        t = np.full(4, np.inf)
        p = np.zeros(4)
        return RegressionReport(beta, se, t, p, dof, rss, zero_residual=True, fitted=fitted)

    t = beta / se
    p = student_t_pvalue(t, dof)
    return RegressionReport(beta, se, t, p, dof, rss, fitted=fitted)


@dataclasses.dataclass(frozen=True)
class PredictiveStrength:
    """
    Relative predictive strength of a biomarker candidate.

    Attributes
    ----------
    t_pred : float
        t-value of the candidate-treatment interaction.
    t_prog : float
        t-value of the candidate main effect.
    ratio : float
        |t_pred / t_prog|, or +inf when undefined.
    degenerate : bool
        The main-effect t-value is zero or the regression was degenerate.
    """
    t_pred: float
    t_prog: float
    ratio: float
    degenerate: bool

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, content):
        return cls(**content)


def predictive_strength(report):
    """
    Summarize a regression report as the ratio of the interaction t-value to the
    candidate main-effect t-value.

    Parameters
    ----------
    report : RegressionReport
        Interaction regression of the candidate.

    Returns
    -------
    PredictiveStrength
    """
    t_pred = float(report.t[3])
    t_prog = float(report.t[2])
    degenerate = report.degenerate or t_prog == 0 or not np.isfinite(t_prog) or not np.isfinite(t_pred)
    with np.errstate(divide='ignore', invalid='ignore'):
        ratio = abs(t_pred / t_prog) if t_prog != 0 else np.inf
    if not np.isfinite(ratio):
        ratio = np.inf
    return PredictiveStrength(t_pred, t_prog, float(ratio), bool(degenerate))


def significant(report, alpha=0.05):
    """
    Whether the candidate-treatment interaction is significant at level alpha.
    Degenerate reports are never significant.
    """
    if report.degenerate:
        return False
    return bool(report.p[3] < alpha)


def compute_bounds(x_prog, x_pred, T, Y):
    """
    Experimental bounds of the relative predictive strength, obtained by evaluating
    the purely prognostic (lower) and purely predictive (upper) ground-truth
    biomarkers as candidates.

    Parameters
    ----------
    x_prog, x_pred : (n,) array_like
        Ground-truth biomarker values.
    T : (n,) array_like
        Treatment indicators.
    Y : (n,) array_like
        Outcomes.

    Returns
    -------
    lower, upper : PredictiveStrength
    """
    lower = predictive_strength(fit_interaction_ols(x_prog, T, Y))
    upper = predictive_strength(fit_interaction_ols(x_pred, T, Y))
    return lower, upper
