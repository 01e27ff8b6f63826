import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import gamma as gamma_fn
from scipy.stats import kstest

from irsmix.errors import ConfigError, NumericError
from irsmix.mixgamma import (
    NONNEGATIVE,
    SIGNED,
    FadingSpec,
    MixtureGamma,
    fit_fading,
    from_pdf,
    mmse_against,
)


def exp1():
    return MixtureGamma([1.0], [1.0], [1.0])


def gamma22():
    # Gamma(shape 2, rate 2): eps = xi^beta / Gamma(beta) = 4
    return MixtureGamma([4.0], [2.0], [2.0])


class TestPdf:
    def test_exponential(self):
        assert exp1().pdf(1.0) == pytest.approx(math.exp(-1.0), rel=1e-14)

    def test_gamma22(self):
        assert gamma22().pdf(0.5) == pytest.approx(4 * 0.5 * math.exp(-1.0), rel=1e-14)

    def test_two_term_mixture(self):
        # equal-weight Exp(1)/Exp(2): 0.5 e^{-1} + 0.5 * 2 e^{-2}
        mix = MixtureGamma([0.5, 1.0], [1.0, 1.0], [1.0, 2.0])
        assert mix.pdf(1.0) == pytest.approx(0.5 * math.exp(-1) + math.exp(-2), rel=1e-14)
        assert mix.pdf(1.0) == pytest.approx(0.3192750038, rel=1e-9)

    def test_domain(self):
        with pytest.raises(ConfigError):
            exp1().pdf(0.0)
        with pytest.raises(ConfigError):
            exp1().pdf(-1.0)


class TestCdf:
    def test_zero(self):
        assert gamma22().cdf(0.0) == 0.0

    def test_exponential(self):
        assert exp1().cdf(1.0) == pytest.approx(1 - math.exp(-1.0), rel=1e-13)

    def test_normalization_limit(self):
        for dist in (exp1(), gamma22(), fit_fading(FadingSpec.nakagami(3.0))):
            big = dist.quantile(0.9999) * 10
            assert dist.cdf(big) >= 1 - 1e-4


class TestMoment:
    def test_zeroth_is_mass(self):
        assert gamma22().moment(0.0) == pytest.approx(1.0, abs=1e-14)

    def test_first(self):
        dist = MixtureGamma([9.0 / gamma_fn(2.0)], [2.0], [3.0])  # Gamma(2, 3)
        assert dist.moment(1.0) == pytest.approx(2.0 / 3.0, rel=1e-13)

    def test_half_moment_quadrature_oracle(self):
        dist = MixtureGamma([9.0], [2.0], [3.0])
        ref, _ = quad(lambda x: math.sqrt(x) * dist.pdf(x), 0, np.inf, limit=200)
        assert dist.moment(0.5) == pytest.approx(ref, rel=1e-9)
        assert dist.moment(0.5) == pytest.approx(
            gamma_fn(2.5) / (gamma_fn(2.0) * math.sqrt(3.0)), rel=1e-12
        )

    def test_quadrature_agreement_sweep(self):
        dist = MixtureGamma([0.5, 2.0], [1.0, 2.0], [1.0, 2.0]).renormalized()
        for l in (0.5, 1.0, 2.0, 3.0):
            ref, _ = quad(lambda x: x**l * dist.pdf(x), 0, np.inf, limit=300)
            assert dist.moment(l) == pytest.approx(ref, rel=1e-6)

    def test_domain(self):
        with pytest.raises(ConfigError):
            exp1().moment(-1.0)


class TestLaplace:
    def test_at_zero(self):
        assert gamma22().laplace(0.0) == pytest.approx(1.0, rel=1e-14)

    def test_exponential(self):
        assert exp1().laplace(1.0) == pytest.approx(0.5, rel=1e-14)

    def test_gamma_closed_form(self):
        # (xi/(xi+s))^beta = (2/4)^2
        assert gamma22().laplace(2.0) == pytest.approx(0.25, rel=1e-13)

    def test_quadrature_oracle(self):
        dist = MixtureGamma([0.5, 2.0], [1.0, 2.0], [1.0, 2.0]).renormalized()
        for s in (0.1, 1.0, 10.0):
            ref, _ = quad(lambda x: math.exp(-s * x) * dist.pdf(x), 0, np.inf, limit=300)
            assert dist.laplace(s) == pytest.approx(ref, abs=1e-8)

    def test_complex_argument(self):
        val = gamma22().laplace(1.0 + 2.0j)
        assert val == pytest.approx((2.0 / (3.0 + 2.0j)) ** 2, rel=1e-12)

    def test_pole_boundary(self):
        with pytest.raises(ConfigError):
            exp1().laplace(-1.0)


class TestScaledRenormalize:
    def test_scaled_preserves_mass_and_mean(self):
        dist = gamma22()
        s = dist.scaled(2.5)
        assert s.total_mass() == pytest.approx(1.0, abs=1e-12)
        assert s.moment(1.0) == pytest.approx(2.5 * dist.moment(1.0), rel=1e-12)

    def test_renormalize_idempotent(self):
        dist = gamma22().renormalized()
        again = dist.renormalized()
        assert np.allclose(dist.eps, again.eps, rtol=1e-14)

    def test_renormalize_halves_mass_two(self):
        dist = MixtureGamma([8.0], [2.0], [2.0])  # mass 2
        assert dist.total_mass() == pytest.approx(2.0)
        assert dist.renormalized().total_mass() == pytest.approx(1.0, abs=1e-13)

    def test_renormalize_failures(self):
        with pytest.raises(NumericError):
            MixtureGamma([1.0, -1.0], [1.0, 1.0], [1.0, 1.0], kind=SIGNED).renormalized()


class TestInvariantsAndValidation:
    def test_kind_enforcement(self):
        with pytest.raises(ConfigError):
            MixtureGamma([-1.0], [1.0], [1.0], kind=NONNEGATIVE)
        with pytest.raises(ConfigError):
            MixtureGamma([1.0], [-1.0], [1.0])
        with pytest.raises(ConfigError):
            MixtureGamma([1.0], [1.0], [0.0])

    def test_validate_mass(self):
        with pytest.raises(NumericError):
            MixtureGamma([8.0], [2.0], [2.0]).validate()
        gamma22().validate()

    def test_signed_probe(self):
        # a signed combination that stays a density passes; one whose sum
        # dips clearly negative in the bulk fails the pointwise probe
        ok = MixtureGamma([-4.0, 2.0], [2.0, 1.0], [2.0, 1.0], kind=SIGNED)  # mass 1
        assert ok.total_mass() == pytest.approx(1.0)
        ok.validate()
        bad = MixtureGamma([4.0, -4.86], [2.0, 6.0], [2.0, 3.0], kind=SIGNED)
        bad = MixtureGamma(bad.eps / bad.total_mass(), bad.beta, bad.xi, kind=SIGNED)
        assert bad.total_mass() == pytest.approx(1.0)
        with pytest.raises(NumericError):
            bad.validate()


class TestSerialization:
    def test_round_trip(self):
        dist = MixtureGamma([0.5, 2.0], [1.0, 2.0], [1.0, 2.0]).renormalized()
        rec = dist.to_record()
        assert rec["kind"] == NONNEGATIVE
        assert [len(t) for t in rec["terms"]] == [3, 3]
        back = MixtureGamma.from_record(rec)
        assert np.allclose(back.eps, dist.eps)
        assert np.allclose(back.beta, dist.beta)
        assert np.allclose(back.xi, dist.xi)

    def test_malformed(self):
        with pytest.raises(ConfigError):
            MixtureGamma.from_record({"kind": "nonnegative"})
        with pytest.raises(ConfigError):
            MixtureGamma.from_record({"kind": "nonnegative", "terms": [[1.0, 2.0]]})


class TestFromPdf:
    def test_exponential_target(self):
        fit = from_pdf(lambda x: np.exp(-np.asarray(x, float)), u=20.0, max_terms=200)
        grid = np.logspace(math.log10(1.0005e-3), math.log10(6.9078), 1000)
        mmse = float(np.mean((fit.pdf(grid) - np.exp(-grid)) ** 2))
        # oracle-computed value for the renormalized construction is 3.34e-4
        # (the raw, unnormalized sum reaches 1.8e-5 but is not a density)
        assert mmse <= 4e-4
        assert fit.total_mass() == pytest.approx(1.0, abs=1e-10)

    def test_weights_nonnegative(self):
        fit = from_pdf(lambda x: np.exp(-np.asarray(x, float)), u=10.0, max_terms=80)
        assert np.all(fit.eps >= 0)

    def test_refinement_sweep(self):
        target = lambda x: np.asarray(x, float) ** 2 * np.exp(-np.asarray(x, float)) / 2.0
        grid = np.logspace(-2, 1.2, 800)
        errs = []
        for u, terms in ((20.0, 400), (40.0, 800)):
            fit = from_pdf(target, u=u, max_terms=terms)
            errs.append(float(np.mean((fit.pdf(grid) - target(grid)) ** 2)))
        assert errs[1] <= errs[0]

    def test_rejects_unnormalized(self):
        with pytest.raises(ConfigError):
            from_pdf(lambda x: 2.0 * np.exp(-np.asarray(x, float)), u=10.0, max_terms=50)


class TestFitFading:
    def test_rayleigh_single_term(self):
        dist = fit_fading(FadingSpec.rayleigh())
        assert len(dist) == 1
        assert dist.terms == pytest.approx(np.array([[1.0, 1.0, 1.0]]))

    def test_nakagami_two(self):
        dist = fit_fading(FadingSpec.nakagami(2.0))
        assert dist.terms == pytest.approx(np.array([[4.0, 2.0, 2.0]]))

    def test_nakagami_exact_pdf(self):
        m, om = 3.0, 2.0
        dist = fit_fading(FadingSpec.nakagami(m, om))
        xs = np.linspace(0.05, 8.0, 50)
        rate = m / om
        ref = rate**m * xs ** (m - 1) * np.exp(-rate * xs) / gamma_fn(m)
        assert dist.pdf(xs) == pytest.approx(ref, rel=1e-12)

    def test_generic_auto_truncation(self):
        target = lambda x: np.asarray(x, float) ** 2 * np.exp(-np.asarray(x, float)) / 2.0
        dist = fit_fading(FadingSpec.generic(target), u=30.0)
        # trailing construction weight below 1e-8 of the total
        i = np.arange(1, len(dist) + 50)
        w = target((i - 1) / 30.0) / 30.0
        assert w[len(dist):].sum() < 1e-8 * w.sum()
        grid = dist.probe_grid(600)
        assert float(np.mean((dist.pdf(grid) - target(grid)) ** 2)) < 5e-4

    def test_sampling_round_trip(self):
        # KS between 1e6 Gamma draws and the fitted cdf
        m, om = 2.0, 1.0
        dist = fit_fading(FadingSpec.nakagami(m, om))
        rng = np.random.default_rng(11)
        draws = rng.gamma(m, om / m, 1_000_000)
        stat = kstest(draws, lambda v: np.clip(dist.cdf(v), 0, 1)).statistic
        assert stat < 0.002

    def test_invalid_spec(self):
        with pytest.raises(ConfigError):
            FadingSpec.nakagami(0.3)
        with pytest.raises(ConfigError):
            FadingSpec("nakagami", m=1.0, omega=-1.0)
        with pytest.raises(ConfigError):
            FadingSpec("weibull")


class TestMmseAgainst:
    def test_self_is_zero(self):
        dist = gamma22()
        grid = dist.probe_grid(500)
        assert mmse_against(dist, grid, dist.pdf(grid)) == pytest.approx(0.0, abs=1e-28)

    def test_exponential_exact(self):
        dist = exp1()
        grid = dist.probe_grid(1000)
        assert mmse_against(dist, grid, np.exp(-grid)) <= 1e-28

    def test_grid_too_small(self):
        dist = gamma22()
        with pytest.raises(ConfigError):
            mmse_against(dist, [1.0] * 50, [1.0] * 50)
        mid = np.linspace(0.4, 0.6, 200)  # clipped into the bulk
        with pytest.raises(ConfigError):
            mmse_against(dist, mid, dist.pdf(mid))


class TestQuantileProbe:
    def test_quantile_inverts_cdf(self):
        dist = gamma22()
        for p in (0.01, 0.5, 0.99):
            assert dist.cdf(dist.quantile(p)) == pytest.approx(p, abs=1e-9)

    def test_probe_grid_span(self):
        dist = gamma22()
        g = dist.probe_grid(1000)
        assert g.size == 1000
        assert dist.cdf(g[0]) == pytest.approx(1e-3, abs=2e-4)
        assert dist.cdf(g[-1]) == pytest.approx(0.999, abs=2e-4)
