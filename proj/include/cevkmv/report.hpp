#pragma once

#include "cevkmv/pipeline.hpp"
#include "cevkmv/stats_tests.hpp"

#include <optional>
#include <string>
#include <vector>

namespace cevkmv {

/// One row of a distance summary table: Quarter, Group, Mean, Std., Alpha, Beta.
/// Mean and Std. use every distance; the gamma fit uses the positive ones and
/// is absent when fewer than 2 remain or they are all equal.
struct GroupSummary {
    std::string quarter;
    Group group = Group::NonST;
    std::size_t n = 0;
    std::size_t non_positive = 0;
    double mean = 0.0;
    double std_dev = 0.0;  // sample standard deviation (n - 1)
    std::optional<GammaFit> gamma;
};

/// Both group tests on the positive distances of one quarter.
struct QuarterTest {
    std::string quarter;
    std::optional<TestReport> report;  // absent when a gamma fit is undefined
    std::size_t dropped = 0;           // non-positive distances left out
    std::string note;
};

/// Distances usable by the gamma-based tests (finite and > 0).
std::vector<double> positive_part(const std::vector<double>& x);

std::vector<double> distances(const StudyResult& r, ModelTag model, const std::string& quarter,
                              Group group);
std::vector<GroupSummary> summarize(const StudyResult& r, ModelTag model);
std::vector<QuarterTest> group_tests(const StudyResult& r, ModelTag model);
/// Per quarter: mean non-ST distance minus mean ST distance.
std::vector<double> mean_gap_series(const StudyResult& r, ModelTag model);

/// Writes every table, plot, plot-data file and manifest.json into `dir`.
/// The output is a pure function of `r`.
void write_bundle(const StudyResult& r, const std::string& dir);

/// Reads back the records a bundle was emitted from.
StudyResult load_bundle(const std::string& dir);

}  // namespace cevkmv
