#include <gtest/gtest.h>

#include "ksreg/verify.hpp"

namespace ksreg {
namespace {

TEST(Verify, EverySuitePassesAtSmallSampleCounts) {
    for (const auto& name : suite_names()) {
        const SuiteResult r = run_suite(name, 5, 1);
        EXPECT_TRUE(r.passed()) << name;
        EXPECT_FALSE(r.checks.empty()) << name;
        for (const auto& c : r.checks) EXPECT_GT(c.samples, 0) << name << "/" << c.name;
    }
}

TEST(Verify, AllIsTheConcatenationOfSingleSuites) {
    const VerifyReport all = run_verify("all", 3, 9);
    ASSERT_EQ(all.suites.size(), suite_names().size());
    const SuiteResult hj = run_suite("hj", 3, 9);
    const SuiteResult& from_all = all.suites[2];
    ASSERT_EQ(from_all.suite, "hj");
    ASSERT_EQ(from_all.checks.size(), hj.checks.size());
    for (std::size_t i = 0; i < hj.checks.size(); ++i)
        EXPECT_EQ(from_all.checks[i].max_deviation, hj.checks[i].max_deviation);
}

TEST(Verify, SampleCaps) {
    EXPECT_EQ(suite_sample_count("kscore", 100000), 100000);
    EXPECT_EQ(suite_sample_count("canonical", 100000), 40);
    EXPECT_THROW(suite_sample_count("kscore", 0), UsageError);
    EXPECT_THROW(run_suite("nope", 1, 1), UsageError);
}

TEST(Verify, FailuresNameTheInvariant) {
    VerifyReport r;
    r.suites.push_back({"kscore", 1, {{"projection_norm", 1.0, 1e-13, 1}, {"lift_round_trip", 0.0, 1e-13, 1}}});
    EXPECT_FALSE(r.passed());
    EXPECT_EQ(r.failures(), std::vector<std::string>{"kscore/projection_norm"});
    const Json j = to_json(r);
    EXPECT_FALSE(j["passed"].get<bool>());
    EXPECT_EQ(j["failures"][0], "kscore/projection_norm");
    InvariantCheck inf{"x", std::numeric_limits<double>::infinity(), 1.0, 1};
    EXPECT_FALSE(inf.passed());
}

}  // namespace
}  // namespace ksreg
