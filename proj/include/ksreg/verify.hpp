#pragma once

// Seeded invariant suites behind `ksreg verify`. Each suite measures the
// largest deviation of a list of named invariants over random samples and
// compares it with a fixed tolerance.

#include <cstdint>
#include <string>
#include <vector>

#include "ksreg/io.hpp"

namespace ksreg {

// Unknown suite name or invalid sample count.
class UsageError : public Error {
public:
    using Error::Error;
};

struct InvariantCheck {
    std::string name;
    double max_deviation = 0.0;
    double tolerance = 0.0;
    long samples = 0;

    bool passed() const;  // finite and <= tolerance
};

struct SuiteResult {
    std::string suite;
    long samples = 0;  // points drawn by this suite
    std::vector<InvariantCheck> checks;

    bool passed() const;
    const InvariantCheck& check(const std::string& name) const;
};

struct VerifyReport {
    std::uint64_t seed = 0;
    long samples = 0;
    std::vector<SuiteResult> suites;

    bool passed() const;
    // "suite/invariant" for every failed check.
    std::vector<std::string> failures() const;
};

// algebra, kscore, hj, canonical, dynamics.
const std::vector<std::string>& suite_names();

// Sample budget actually used by a suite for a requested count. The cheap
// suites use it unchanged; the series, canonical and dynamics suites cap it.
long suite_sample_count(const std::string& suite, long requested);

// Runs one suite. Each suite draws from its own generator seeded by
// (seed, suite index), so "all" is the concatenation of the single runs.
SuiteResult run_suite(const std::string& suite, long samples, std::uint64_t seed);
// `suite` is one of suite_names() or "all".
VerifyReport run_verify(const std::string& suite, long samples, std::uint64_t seed);

Json to_json(const VerifyReport& r);

}  // namespace ksreg
