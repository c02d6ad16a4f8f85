#include "dnpvi/error.hpp"
#include "dnpvi/random.hpp"
#include "dnpvi/validate.hpp"

#include "support.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include <cmath>

using namespace dnpvi;
using test::make_spec;

namespace {

const SampleBox kBox{1000, 10.0, 42};

double adaptive_psi(const std::function<double(double)>& B, double z) {
    using boost::math::quadrature::gauss_kronrod;
    return gauss_kronrod<double, 15>::integrate([&](double s) { return (B(z) - B(s * z)) * z; }, 0.0, 1.0, 10, 1e-14);
}

}  // namespace

TEST(Monotone, IdentityPasses) {
    const CheckEntry e = check_monotone_gradient(make_spec(1, "B1 = u1\nK11 = 1"), kBox);
    EXPECT_EQ(e.condition, "A1");
    EXPECT_EQ(e.verdict, Verdict::SampledPass);
    EXPECT_TRUE(e.witnesses.empty());
}

TEST(Monotone, NegatedIdentityFailsWithWitness) {
    const CheckEntry e = check_monotone_gradient(make_spec(1, "B1 = -u1\nK11 = 1"), kBox);
    EXPECT_EQ(e.verdict, Verdict::Fail);
    ASSERT_FALSE(e.witnesses.empty());
    const Witness& w = e.witnesses.front();
    ASSERT_EQ(w.z1.size(), 1u);
    ASSERT_EQ(w.z2.size(), 1u);
    EXPECT_LE((-w.z1[0] + w.z2[0]) * (w.z1[0] - w.z2[0]), 0.0);
}

TEST(Monotone, SymmetricSystemPasses) {
    const ProblemSpec s = make_spec(2, "B1 = u1 + u2\nB2 = u1 + 2*u2\nK11 = 1\nK22 = 1");
    const CheckEntry e = check_monotone_gradient(s, kBox);
    EXPECT_EQ(e.verdict, Verdict::SampledPass);
    EXPECT_LT(e.estimates.at("max_jacobian_asymmetry"), 1e-6);
}

TEST(Monotone, NonGradientSystemFails) {
    // monotone but with skew Jacobian [[1,1],[-1,1]]: not a gradient
    const ProblemSpec s = make_spec(2, "B1 = u1 + u2\nB2 = -u1 + u2\nK11 = 1\nK22 = 1");
    EXPECT_EQ(check_monotone_gradient(s, kBox).verdict, Verdict::Fail);
}

TEST(Psi, Examples) {
    const ProblemSpec lin = make_spec(1, "B1 = u1\nK11 = 1");
    const double two = 2.0, zero = 0.0, one = 1.0;
    EXPECT_NEAR(legendre_psi(lin, std::span(&two, 1)), 2.0, 1e-14);
    EXPECT_EQ(legendre_psi(lin, std::span(&zero, 1)), 0.0);
    const ProblemSpec cubic = make_spec(1, "B1 = u1^3\nK11 = 1", "nu = 3\np = 1\nalpha = 1\n");
    const double oracle = adaptive_psi([](double z) { return z * z * z; }, 1.0);
    EXPECT_NEAR(oracle, 0.75, 1e-14);
    EXPECT_NEAR(legendre_psi(cubic, std::span(&one, 1)), oracle, 1e-13);
}

TEST(Psi, AgreesWithAdaptiveQuadrature) {
    const ProblemSpec s = make_spec(1, "B1 = u1 + u1^3 + tanh(u1)\nK11 = 1", "nu = 3\np = 1\nalpha = 1\n");
    Rng rng(7);
    for (int k = 0; k < 20; ++k) {
        const double z = rng.uniform(-5.0, 5.0);
        const double ref = adaptive_psi([](double v) { return v + v * v * v + std::tanh(v); }, z);
        EXPECT_NEAR(legendre_psi(s, std::span(&z, 1), 32), ref, 1e-9 * (1 + std::abs(ref)));
    }
}

TEST(Psi, QuadraticOnRandomPoints) {
    const ProblemSpec lin = make_spec(2, "B1 = u1\nB2 = u2\nK11 = 1\nK22 = 1");
    Rng rng(42);
    for (int k = 0; k < 100; ++k) {
        const std::array<double, 2> z{rng.uniform(-10, 10), rng.uniform(-10, 10)};
        const double psi = legendre_psi(lin, z);
        EXPECT_NEAR(psi, 0.5 * (z[0] * z[0] + z[1] * z[1]), 1e-12 * (1 + psi));
        EXPECT_GE(psi, 0.0);
    }
}

TEST(Psi, NonNegativeForMonotoneGradient) {
    const ProblemSpec s = test::load("twocomp2d");
    Rng rng(3);
    for (int k = 0; k < 100; ++k) {
        const std::array<double, 2> z{rng.uniform(-10, 10), rng.uniform(-10, 10)};
        EXPECT_GE(legendre_psi(s, z), 0.0);
    }
}

TEST(Ellipticity, ConstantPasses) {
    const CheckEntry e = check_K_pd_bounded(make_spec(1, "B1 = u1\nK11 = 1"), kBox);
    EXPECT_EQ(e.condition, "A2");
    EXPECT_NE(e.verdict, Verdict::Fail);
    EXPECT_DOUBLE_EQ(e.estimates.at("c_ellipticity"), 1.0);
}

TEST(Ellipticity, NonSymmetricIndefiniteFails) {
    const ProblemSpec s = make_spec(2, "B1 = u1\nB2 = u2\nK11 = 1\nK12 = 3\nK22 = 1");
    const CheckEntry e = check_K_pd_bounded(s, kBox);
    EXPECT_EQ(e.verdict, Verdict::Fail);
    ASSERT_FALSE(e.witnesses.empty());
    const auto& xi = e.witnesses.front().z2;
    ASSERT_EQ(xi.size(), 2u);
    // symmetric part [[1,1.5],[1.5,1]] has eigenvector (1,-1)/sqrt2 with eigenvalue -1/2
    EXPECT_NEAR(std::abs(xi[0]), std::sqrt(0.5), 1e-12);
    EXPECT_NEAR(xi[0] + xi[1], 0.0, 1e-12);
    EXPECT_NEAR(xi[0] * xi[0] + 3 * xi[0] * xi[1] + xi[1] * xi[1], -0.5, 1e-12);
}

TEST(Ellipticity, DegeneratingCoefficientEstimate) {
    const CheckEntry e = check_K_pd_bounded(make_spec(1, "B1 = u1\nK11 = 1/(1+u1^2)"), kBox);
    EXPECT_NE(e.verdict, Verdict::Fail);
    const double c = e.estimates.at("c_ellipticity");
    EXPECT_GE(c, 1.0 / 101.0 - 1e-15);
    EXPECT_LE(c, 1.05 / 101.0);
}

TEST(A4, Examples) {
    const A4Result i = check_A4(1, 1, 1, 2);
    EXPECT_TRUE(i.ok);
    EXPECT_NE(i.reason.find("case (i)"), std::string::npos);
    const A4Result ii = check_A4(3, 3, 1.5, 1);
    EXPECT_TRUE(ii.ok);
    EXPECT_NE(ii.reason.find("case (ii)"), std::string::npos);
    const A4Result bad = check_A4(1, 2, 0.5, 2);
    EXPECT_FALSE(bad.ok);
    EXPECT_NE(bad.reason.find("p = 2 > nu = 1"), std::string::npos);
}

TEST(A4, BranchBoundsAndVariants) {
    // case (ii), N = 2: alpha < (3 nu + 1)/(3 + nu) = 10/6 for nu = 3
    EXPECT_TRUE(check_A4(3, 1, 1.6, 2).ok);
    EXPECT_FALSE(check_A4(3, 1, 1.7, 2).ok);
    // N = 1, nu = 5: branch (nu+1)/2 = 3; literal trace bound 2 + alpha never binds,
    // nu variant gives (1 + 5 + 1) = 7
    EXPECT_TRUE(check_A4(5, 1, 2.9, 1, A4Variant::Literal).ok);
    EXPECT_TRUE(check_A4(5, 1, 2.9, 1, A4Variant::NuBound).ok);
    // N = 3 is accepted by the predicate only
    EXPECT_TRUE(check_A4(1, 1, 0.5, 3).ok);
    EXPECT_FALSE(check_A4(1, 1, 1, 4).ok);
}

TEST(A4, MonotoneInP) {
    for (double nu : {0.5, 1.0, 2.0, 3.0}) {
        for (double alpha : {0.25, 0.5, 1.0, 1.2, 1.5, 2.0}) {
            for (int N : {1, 2, 3}) {
                bool seen_fail = false;
                for (double p = 0.0; p <= 4.0; p += 0.25) {
                    const bool ok = check_A4(nu, p, alpha, N).ok;
                    if (seen_fail) EXPECT_FALSE(ok) << nu << " " << p << " " << alpha << " " << N;
                    if (!ok) seen_fail = true;
                }
            }
        }
    }
}

TEST(Growth, Examples) {
    EXPECT_NE(check_growth(make_spec(1, "B1 = u1\nK11 = 1\nF1 = u1"), kBox).verdict, Verdict::Fail);
    const CheckEntry lin = check_growth(make_spec(1, "B1 = u1\nK11 = 1\nF1 = u1"), kBox);
    EXPECT_LE(lin.estimates.at("c_F"), 1.0);

    const CheckEntry cubic = check_growth(make_spec(1, "B1 = u1\nK11 = 1\nF1 = u1^3"), kBox);
    EXPECT_EQ(cubic.verdict, Verdict::Fail);
    ASSERT_FALSE(cubic.witnesses.empty());
    EXPECT_NE(cubic.witnesses.front().detail.find("|F|"), std::string::npos);

    const ProblemSpec tanh_g =
        make_spec(1, "B1 = u1\nK11 = 1\ng1 = tanh(u1)", "nu = 1\np = 1\nalpha = 1\n", 1, "gamma1 = left\ngamma2 = right");
    const CheckEntry g = check_growth(tanh_g, kBox);
    EXPECT_NE(g.verdict, Verdict::Fail);
    EXPECT_LE(g.estimates.at("c_g"), 1.0);
}

TEST(Growth, RayOracleAgrees) {
    // ratio |z|^k / (|z| + 1) along a ray: grows for k > 1, bounded for k <= 1
    for (int k : {0, 1, 2, 3}) {
        const ProblemSpec s = make_spec(1, "B1 = u1\nK11 = 1\nF1 = u1^" + std::to_string(k));
        double prev = 0.0;
        bool grows = true;
        for (int d = 0; d < 8; ++d) {
            const double z = 10.0 * std::ldexp(1.0, d);
            const double r = std::pow(z, k) / (z + 1.0);
            grows = grows && r > 1.5 * prev;
            prev = r;
        }
        EXPECT_EQ(check_growth(s, kBox).verdict == Verdict::Fail, grows) << k;
    }
}

TEST(Kirchhoff, ObstacleTransform) {
    const ProblemSpec s = test::load("obstacle1d");
    Rng rng(5);
    for (int k = 0; k < 20; ++k) {
        const double z = rng.uniform(-5, 5);
        const double h = kirchhoff_transform(s, 0, z, 32);
        EXPECT_NEAR(h, z + std::atan(z), 1e-10);
        EXPECT_NEAR(kirchhoff_inverse(s, 0, h), z, 1e-8);
    }
    EXPECT_EQ(kirchhoff_transform(s, 0, 0.0), 0.0);
}

TEST(Uniqueness, DiagonalStructure) {
    const std::string hdr = "nu = 1\np = 1\nalpha = 1\nuniqueness = true\n";
    const auto find = [](const std::vector<CheckEntry>& es, const std::string& name) -> const CheckEntry& {
        for (const auto& e : es) if (e.condition == name) return e;
        throw std::runtime_error("missing " + name);
    };
    const auto ok = check_uniqueness(make_spec(2, "B1 = u1\nB2 = u2\nK11 = 1 + 1/(1+u1^2)\nK22 = 2", hdr), kBox);
    EXPECT_NE(find(ok, "uniq-diagonal").verdict, Verdict::Fail);
    EXPECT_NE(find(ok, "uniq-bounds").verdict, Verdict::Fail);
    EXPECT_NE(find(ok, "uniq-lipschitz").verdict, Verdict::Fail);

    const auto coupled = check_uniqueness(make_spec(2, "B1 = u1\nB2 = u2\nK11 = 1\nK12 = 0.5\nK22 = 1", hdr), kBox);
    EXPECT_EQ(find(coupled, "uniq-diagonal").verdict, Verdict::Fail);

    const auto cross = check_uniqueness(make_spec(2, "B1 = u1\nB2 = u2\nK11 = 1 + u2^2\nK22 = 1", hdr), kBox);
    EXPECT_EQ(find(cross, "uniq-diagonal").verdict, Verdict::Fail);
}

TEST(Validate, BundledSpecsPass) {
    for (const char* name : {"obstacle1d", "heat", "twocomp2d"}) {
        const ProblemSpec s = test::load(name);
        const ValidationReport r = validate(s, make_mesh(s));
        EXPECT_TRUE(r.passed()) << name << "\n" << r.to_text();
        if (s.uniqueness_mode) EXPECT_NE(r.find("uniq-diagonal"), nullptr);
    }
}

TEST(Validate, BadSpecsFailTheRightCondition) {
    const auto failing = [](const char* name, const char* cond) -> CheckEntry {
        const ProblemSpec s = test::load(name);
        const ValidationReport r = validate(s, make_mesh(s));
        EXPECT_FALSE(r.passed()) << name;
        const CheckEntry* e = r.find(cond);
        if (e == nullptr) throw std::runtime_error(std::string("no entry ") + cond);
        EXPECT_EQ(e->verdict, Verdict::Fail) << name;
        EXPECT_FALSE(e->witnesses.empty()) << name;
        return *e;
    };
    (void)failing("bad_nonmonotone", "A1");
    const CheckEntry a4 = failing("bad_exponents", "A4");
    EXPECT_EQ(a4.witnesses.front().z1, (std::vector<double>{1, 2, 1, 1}));
    const CheckEntry a2 = failing("bad_nonelliptic", "A2");
    EXPECT_NE(a2.witnesses.front().detail.find("-0.5"), std::string::npos);
}

TEST(Validate, Deterministic) {
    const ProblemSpec s = test::load("twocomp2d");
    const Mesh mesh = make_mesh(s);
    EXPECT_EQ(validate(s, mesh).to_text(), validate(s, mesh).to_text());
}

TEST(Validate, InitialDataErrorsBecomeFailures) {
    const ProblemSpec s = make_spec(1, "B1 = u1\nK11 = 1", "nu = 1\np = 1\nalpha = 1\n", 1, "", "[initial]\nu01 = 1/x\n");
    const ValidationReport r = validate(s, make_mesh(s));
    ASSERT_NE(r.find("A5"), nullptr);
    EXPECT_EQ(r.find("A5")->verdict, Verdict::Fail);
}
