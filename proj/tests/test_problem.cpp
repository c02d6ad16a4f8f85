#include "dnpvi/error.hpp"
#include "dnpvi/problem.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace dnpvi;

namespace {

const char* kMinimal = R"([problem]
m = 1
dim = 1
nu = 1
p = 1
alpha = 1
[coefficients]
B1 = u1
K11 = 1
[boundary]
gamma1 = left
gamma3 = right
constrained = 1
)";

int failing_line(const std::string& text) {
    try {
        (void)parse_problem(text);
    } catch (const ParseError& e) {
        return e.line();
    }
    ADD_FAILURE() << "expected a parse error";
    return -1;
}

}  // namespace

TEST(Problem, MinimalDefaults) {
    const ProblemSpec s = parse_problem(kMinimal);
    EXPECT_EQ(s.m, 1);
    EXPECT_EQ(s.dim, 1);
    EXPECT_TRUE(s.F[0].is_zero());
    EXPECT_TRUE(s.g[0].is_zero());
    EXPECT_TRUE(s.u0[0].is_zero());
    EXPECT_FALSE(s.dirichlet.has_value());
    EXPECT_TRUE(s.any_constrained());
    EXPECT_FALSE(s.has_neumann_data());
    EXPECT_EQ(s.domain.kind, DomainSpec::Kind::Interval);
    EXPECT_EQ(s.domain.n, 32);
    EXPECT_EQ(s.solver.eps_stages, 5);
    EXPECT_EQ(s.sampling.seed, 42u);
    EXPECT_EQ(s.sampling.samples, 1000);
    EXPECT_EQ(s.sampling.box, 10.0);
}

TEST(Problem, BundledObstacle) {
    const ProblemSpec s = test::load("obstacle1d");
    EXPECT_EQ(s.name, "obstacle1d");
    EXPECT_EQ(s.nu, 3.0);
    EXPECT_TRUE(s.uniqueness_mode);
    EXPECT_EQ(s.boundary.at("left"), BoundaryTag::Dirichlet);
    EXPECT_EQ(s.boundary.at("right"), BoundaryTag::Unilateral);
    EXPECT_DOUBLE_EQ(s.F[0].evaluate(EvalPoint<double>{}), 2.0);
    const Mesh mesh = make_mesh(s);
    EXPECT_EQ(mesh.num_elements(), 32u);
}

TEST(Problem, BundledTwoComponent) {
    const ProblemSpec s = test::load("twocomp2d");
    EXPECT_EQ(s.m, 2);
    EXPECT_EQ(s.dim, 2);
    ASSERT_TRUE(s.dirichlet.has_value());
    EXPECT_TRUE(s.K_at(0, 1).is_zero());
    EXPECT_TRUE(s.constrained[0] && s.constrained[1]);
    EXPECT_TRUE(s.has_neumann_data());
    const Mesh mesh = make_mesh(s);
    EXPECT_EQ(mesh.num_nodes(), 81u);
    EXPECT_DOUBLE_EQ(boundary_measure(mesh, BoundaryTag::Neumann), 2.0);
}

TEST(Problem, ErrorsCarryLine) {
    std::string text = kMinimal;
    EXPECT_EQ(failing_line(text + "[solver]\ndt = fast\n"), 15);
    EXPECT_EQ(failing_line(text + "[solver]\nbogus = 1\n"), 15);
    EXPECT_EQ(failing_line(text + "[nowhere]\n"), 14);
    EXPECT_EQ(failing_line("[problem]\nm = 1\nm = 2\n"), 3);
    EXPECT_EQ(failing_line("m = 1\n"), 1);
}

TEST(Problem, ExpressionErrorColumnIsInFile) {
    const std::string text = std::string(kMinimal) + "[initial]\nu01 = 1 + * x\n";
    try {
        (void)parse_problem(text);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 15);
        EXPECT_EQ(e.column(), 11);
    }
}

TEST(Problem, VariableRestrictions) {
    std::string text = kMinimal;
    // B may not depend on x, u0 may not depend on u
    EXPECT_THROW((void)parse_problem(std::string(text).replace(text.find("B1 = u1"), 7, "B1 = x*u1")), ParseError);
    EXPECT_THROW((void)parse_problem(text + "[initial]\nu01 = u1\n"), ParseError);
    EXPECT_THROW((void)parse_problem(text + "[initial]\nu01 = y\n"), ParseError);
}

TEST(Problem, MissingRequiredCoefficient) {
    EXPECT_THROW((void)parse_problem("[problem]\nm = 1\ndim = 1\n[coefficients]\nK11 = 1\n"), ParseError);
    EXPECT_THROW((void)parse_problem("[problem]\nm = 1\ndim = 1\n[coefficients]\nB1 = u1\n"), ParseError);
}

TEST(Problem, StructuralInvariants) {
    std::string text = kMinimal;
    // p > nu parses (the validator reports it); nu must be positive
    EXPECT_THROW((void)parse_problem(std::string(text).replace(text.find("nu = 1"), 6, "nu = 0")), ParseError);
    // uniqueness mode with off-diagonal K parses; the validator rejects it
    const char* coupled = R"([problem]
m = 2
dim = 1
uniqueness = true
[coefficients]
B1 = u1
B2 = u2
K11 = 1
K12 = 0.5
K22 = 1
[boundary]
gamma1 = left, right
)";
    const ProblemSpec s = parse_problem(coupled);
    EXPECT_TRUE(s.uniqueness_mode);
    EXPECT_FALSE(s.K_at(0, 1).is_zero());
}

TEST(Problem, MeshChecksAgainstData) {
    std::string text = kMinimal;
    ProblemSpec s = parse_problem(std::string(text).replace(text.find("K11 = 1"), 7, "K11 = 1\ng1 = 1"));
    EXPECT_THROW((void)make_mesh(s), InvalidArgument);  // g without a Neumann part

    ProblemSpec untagged = parse_problem(std::string(text).replace(text.find("gamma3 = right"), 14, ""));
    EXPECT_THROW((void)make_mesh(untagged), InvalidArgument);
}

TEST(Problem, MeshFileDomain) {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "dnpvi_problem_mesh";
    fs::create_directories(dir);
    std::ofstream(dir / "tri.mesh") << "NODES\n0 0 0\n1 1 0\n2 0 1\nELEMENTS\n0 1 2\nFACETS\n0 1 base\n1 2 hyp\n2 0 leg\n";
    const std::string text = R"([problem]
m = 1
dim = 2
[coefficients]
B1 = u1
K11 = 1
[boundary]
gamma1 = leg
gamma2 = base
gamma3 = hyp
constrained = 1
[domain]
mesh = file
file = tri.mesh
)";
    std::ofstream(dir / "tri.prb") << text;
    const ProblemSpec s = load_problem(dir / "tri.prb");
    const Mesh mesh = make_mesh(s, dir);
    EXPECT_EQ(mesh.num_elements(), 1u);
    EXPECT_NEAR(boundary_measure(mesh, BoundaryTag::Unilateral), std::sqrt(2.0), 1e-15);
}

TEST(Problem, MissingFile) {
    EXPECT_THROW((void)load_problem("/nonexistent/problem.prb"), Error);
}
