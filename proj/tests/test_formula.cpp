#include <doctest.h>

#include <random>
#include <string>

#include "gammkit/bound_spec.hpp"
#include "gammkit/error.hpp"
#include "gammkit/formula.hpp"
#include "gammkit/simlab.hpp"

using namespace gammkit;
using formula::SmoothKind;

namespace {

const char* kNaming =
    "RT ~ Regularity + Number + Voicing + InitialNeighbors + InflectionalEntropy + s(Frequency) + "
    "s(Trial, Subject, bs=\"fs\",m=1) + s(Verb, bs=\"re\")";
const char* kPitch =
    "PitchSemiTone ~ Sex + BranchingOrd + s(NormalizedTime) + s(NormalizedTime, by=BranchingOrd) + "
    "s(NormalizedTime, Speaker, bs=\"fs\", m=1) + s(NormalizedTime, Compound, bs=\"fs\", m=1) + "
    "s(Compound, Sex, bs=\"re\")";
const char* kEeg =
    "Amplitude ~ s(Time, k=10) + s(Time, by=ConstituentOrder, k=10) + te(LogFreqC1, LogFreqC2, k=4) + "
    "te(LogFreqC1, LogFreqC2, by=ConstituentOrder, k=4) + s(LogCompFreq, k=4) + "
    "s(LogCompFreq, by=ConstituentOrder, k=4) + s(Compound, bs=\"re\")+ s(Trial, Subject, bs=\"fs\", m=1)+ "
    "s(Time, Subject, bs=\"fs\", m=1)";

formula::SmoothTerm term(SmoothKind kind, std::vector<std::string> cov, std::vector<int> k, bool k_explicit = false,
                         std::optional<std::string> by = std::nullopt, std::optional<int> m = std::nullopt) {
    formula::SmoothTerm t;
    t.kind = kind;
    t.covariates = std::move(cov);
    t.basis_dim_k = std::move(k);
    t.k_explicit = k_explicit;
    t.by_var = std::move(by);
    t.shrinkage_order_m = m;
    t.label = formula::make_label(t);
    return t;
}

}  // namespace

TEST_CASE("naming formula parses to the expected tree") {
    const auto spec = formula::parse_formula(kNaming);
    CHECK(spec.response == "RT");
    CHECK(spec.parametric_terms ==
          std::vector<std::string>{"Regularity", "Number", "Voicing", "InitialNeighbors", "InflectionalEntropy"});
    REQUIRE(spec.smooth_terms.size() == 3);
    CHECK(spec.smooth_terms[0] == term(SmoothKind::tprs, {"Frequency"}, {10}));
    CHECK(spec.smooth_terms[1] == term(SmoothKind::factor_smooth, {"Trial", "Subject"}, {10}, false, std::nullopt, 1));
    CHECK(spec.smooth_terms[2] == term(SmoothKind::random_effect, {"Verb"}, {}));
    CHECK(spec.smooth_terms[1].label == "fs(Trial,Subject)");
    CHECK(spec.smooth_terms[2].label == "re(Verb)");
}

TEST_CASE("short naming formula: one term of each kind") {
    const auto spec = formula::parse_formula(
        "RT ~ Regularity + s(Frequency) + s(Trial, Subject, bs=\"fs\", m=1) + s(Verb, bs=\"re\")");
    CHECK(spec.parametric_terms.size() == 1);
    REQUIRE(spec.smooth_terms.size() == 3);
    CHECK(spec.smooth_terms[0].kind == SmoothKind::tprs);
    CHECK(spec.smooth_terms[1].kind == SmoothKind::factor_smooth);
    CHECK(spec.smooth_terms[1].shrinkage_order_m == 1);
    CHECK(spec.smooth_terms[2].kind == SmoothKind::random_effect);
}

TEST_CASE("pitch formula parses to the expected tree") {
    const auto spec = formula::parse_formula(kPitch);
    CHECK(spec.response == "PitchSemiTone");
    CHECK(spec.parametric_terms == std::vector<std::string>{"Sex", "BranchingOrd"});
    REQUIRE(spec.smooth_terms.size() == 5);
    CHECK(spec.smooth_terms[0] == term(SmoothKind::tprs, {"NormalizedTime"}, {10}));
    CHECK(spec.smooth_terms[1] == term(SmoothKind::tprs, {"NormalizedTime"}, {10}, false, "BranchingOrd"));
    CHECK(spec.smooth_terms[1].label == "s(NormalizedTime,by=BranchingOrd)");
    CHECK(spec.smooth_terms[2] ==
          term(SmoothKind::factor_smooth, {"NormalizedTime", "Speaker"}, {10}, false, std::nullopt, 1));
    CHECK(spec.smooth_terms[3] ==
          term(SmoothKind::factor_smooth, {"NormalizedTime", "Compound"}, {10}, false, std::nullopt, 1));
    CHECK(spec.smooth_terms[4] == term(SmoothKind::random_effect, {"Compound", "Sex"}, {}));
}

TEST_CASE("EEG formula parses to the expected tree") {
    const auto spec = formula::parse_formula(kEeg);
    CHECK(spec.response == "Amplitude");
    CHECK(spec.parametric_terms.empty());
    REQUIRE(spec.smooth_terms.size() == 9);
    CHECK(spec.smooth_terms[0] == term(SmoothKind::tprs, {"Time"}, {10}, true));
    CHECK(spec.smooth_terms[1] == term(SmoothKind::tprs, {"Time"}, {10}, true, "ConstituentOrder"));
    CHECK(spec.smooth_terms[2] == term(SmoothKind::tensor, {"LogFreqC1", "LogFreqC2"}, {4, 4}, true));
    CHECK(spec.smooth_terms[3] == term(SmoothKind::tensor, {"LogFreqC1", "LogFreqC2"}, {4, 4}, true, "ConstituentOrder"));
    CHECK(spec.smooth_terms[4] == term(SmoothKind::tprs, {"LogCompFreq"}, {4}, true));
    CHECK(spec.smooth_terms[5] == term(SmoothKind::tprs, {"LogCompFreq"}, {4}, true, "ConstituentOrder"));
    CHECK(spec.smooth_terms[6] == term(SmoothKind::random_effect, {"Compound"}, {}));
    CHECK(spec.smooth_terms[7] == term(SmoothKind::factor_smooth, {"Trial", "Subject"}, {10}, false, std::nullopt, 1));
    CHECK(spec.smooth_terms[8] == term(SmoothKind::factor_smooth, {"Time", "Subject"}, {10}, false, std::nullopt, 1));
}

TEST_CASE("minimal formula") {
    const auto spec = formula::parse_formula("y ~ x");
    CHECK(spec.response == "y");
    CHECK(spec.parametric_terms == std::vector<std::string>{"x"});
    CHECK(spec.smooth_terms.empty());
    CHECK(spec.intercept);
    CHECK(spec.rho == 0.0);
}

TEST_CASE("whitespace does not matter") {
    CHECK(formula::parse_formula("y~s(x,k=5)+z") == formula::parse_formula("  y  ~\ts( x , k = 5 )\n+ z "));
}

TEST_CASE("tensor defaults and per-marginal k") {
    const auto a = formula::parse_formula("y ~ te(a, b)");
    CHECK(a.smooth_terms[0].basis_dim_k == std::vector<int>{5, 5});
    const auto b = formula::parse_formula("y ~ te(a, b, k=c(4, 6))");
    CHECK(b.smooth_terms[0].basis_dim_k == std::vector<int>{4, 6});
    CHECK(formula::parse_formula(formula::pretty_print(b)) == b);
}

TEST_CASE("syntax errors carry an offset and expected tokens") {
    try {
        (void)formula::parse_formula("y ~ s(x");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.offset() == 7);
        CHECK_FALSE(e.expected().empty());
    }
    try {
        (void)formula::parse_formula("y ~ a:b");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.offset() == 5);
    }
    CHECK_THROWS_AS((void)formula::parse_formula("y ~ a * b"), ParseError);
    CHECK_THROWS_AS((void)formula::parse_formula("~ x"), ParseError);
    CHECK_THROWS_AS((void)formula::parse_formula("y ~ x +"), ParseError);
    CHECK_THROWS_AS((void)formula::parse_formula("y ~ poly(x, 2)"), DataError);
}

TEST_CASE("semantic errors") {
    CHECK_THROWS_AS((void)formula::parse_formula(""), DataError);
    CHECK_THROWS_WITH_AS((void)formula::parse_formula("y ~ s(x, bs=\"cr\")"), doctest::Contains("cr"), DataError);
    CHECK_THROWS_AS((void)formula::parse_formula("y ~ s(x, m=1)"), DataError);
    CHECK_THROWS_AS((void)formula::parse_formula("y ~ s(x, k=2)"), DataError);
    CHECK_THROWS_AS((void)formula::parse_formula("y ~ s(x, k=5, k=6)"), DataError);
    CHECK_THROWS_AS((void)formula::parse_formula("y ~ s(x, f, bs=\"fs\", by=g)"), DataError);
    CHECK_THROWS_AS((void)formula::parse_formula("y ~ s(x) + s(x)"), DataError);
    CHECK_THROWS_AS((void)formula::parse_formula("y ~ y + x"), DataError);
    CHECK_THROWS_AS((void)formula::parse_formula("y ~ s(a, b)"), DataError);
}

TEST_CASE("AR options") {
    auto spec = formula::parse_formula("y ~ s(x)");
    CHECK_THROWS_AS(formula::set_ar_options(spec, 0.3, std::nullopt), DataError);
    CHECK_THROWS_AS(formula::set_ar_options(spec, 1.2, "Start"), DataError);
    CHECK_THROWS_AS(formula::set_ar_options(spec, -0.1, "Start"), DataError);
    formula::set_ar_options(spec, 0.3, "Start");
    CHECK(spec.rho == 0.3);
    CHECK(spec.ar_start_column == "Start");
}

TEST_CASE("pretty print round trip over generated formulas") {
    std::mt19937 gen(20240611);
    const std::vector<std::string> names = {"x", "z", "Time", "Trial", "f", "g", "Subject", "w.1", "a_b"};
    auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(gen); };
    for (int rep = 0; rep < 300; ++rep) {
        std::vector<std::string> terms;
        std::vector<std::string> used;
        const std::size_t n_terms = 1 + pick(5);
        for (std::size_t t = 0; t < n_terms; ++t) {
            const std::string a = names[pick(names.size())];
            std::string b = names[pick(names.size())];
            if (b == a) b += "2";
            std::string text;
            switch (pick(6)) {
                case 0: text = a; break;
                case 1: text = "s(" + a + (pick(2) ? ", k=" + std::to_string(3 + pick(10)) : "") + ")"; break;
                case 2: text = "s(" + a + ", by=" + b + ")"; break;
                case 3: text = "te(" + a + ", " + b + (pick(2) ? ", k=4" : "") + ")"; break;
                case 4: text = "s(" + a + ", " + b + ", bs=\"fs\"" + (pick(2) ? ", m=1" : "") + ")"; break;
                default: text = "s(" + a + (pick(2) ? ", " + b : "") + ", bs=\"re\")"; break;
            }
            terms.push_back(text);
        }
        std::string text = "y ~ " + terms[0];
        for (std::size_t i = 1; i < terms.size(); ++i) text += " + " + terms[i];
        formula::ModelSpec spec;
        try {
            spec = formula::parse_formula(text);
        } catch (const DataError&) {
            continue;  // duplicate labels from the generator
        }
        INFO(text);
        CHECK(formula::parse_formula(formula::pretty_print(spec)) == spec);
    }
}

TEST_CASE("binding names missing columns") {
    const data::Dataset d({data::Column::make_numeric("y", {1, 2, 3, 4}), data::Column::make_numeric("x", {1, 2, 3, 5})});
    CHECK_THROWS_WITH_AS((void)formula::validate_against(formula::parse_formula("y ~ s(Freq)"), d), doctest::Contains("Freq"),
                         DataError);
    CHECK_THROWS_AS((void)formula::validate_against(formula::parse_formula("y ~ s(x, by=x)"), d), DataError);
    CHECK_THROWS_AS((void)formula::validate_against(formula::parse_formula("y ~ s(x, bs=\"re\")"), d), DataError);
}

TEST_CASE("pitch formula binds to pitch-shaped data") {
    const auto sim = simlab::generate(simlab::pitch_scenario(3));
    auto spec = formula::parse_formula(
        "Pitch ~ Sex + Branching + s(Time) + s(Time, by=Branching) + s(Time, Speaker, bs=\"fs\", m=1) + "
        "s(Time, Compound, bs=\"fs\", m=1) + s(Compound, Sex, bs=\"re\")");
    formula::set_ar_options(spec, 0.98, "NewTimeSeries");
    const auto bound = formula::validate_against(spec, sim.data);
    CHECK(bound.smooths[2].factor_levels.size() == 12);
    CHECK(bound.smooths[3].factor_levels.size() == 40);
    CHECK(bound.smooths[1].by_difference);
    CHECK(bound.smooths[1].by_levels.size() == 4);
    CHECK(bound.smooths[1].block_levels == std::vector<std::string>{"B", "C", "D"});
    CHECK(bound.ar_start.has_value());
}
