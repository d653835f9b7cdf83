#pragma once

#include "causalfair/tabular.hpp"

#include <cstdint>
#include <map>
#include <string>

namespace causalfair::synthgen {

/// Frozen generator weights. Changing any of them changes every derived
/// number in the synthetic-hiring tests.
std::map<std::string, double> default_coefficients();

struct SynthConfig {
    std::size_t n = 4000;
    std::uint64_t seed = 0;
    double p_male = 0.6;
    std::map<std::string, double> coefficients = default_coefficients();

    void validate() const;
};

/// Hiring data: Gender, Race, Age, Major, SAT score, GPA, College rank,
/// Work experience, Job (label, favorable "Yes"). A latent aptitude drives
/// both SAT score and GPA and is not emitted.
tabular::Dataset generate_hiring(const SynthConfig& cfg);

/// Schema file contents matching generate_hiring's columns.
std::string hiring_schema_json();

}  // namespace causalfair::synthgen
