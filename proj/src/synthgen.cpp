#include "causalfair/synthgen.hpp"

#include "causalfair/error.hpp"
#include "causalfair/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace causalfair::synthgen {

std::map<std::string, double> default_coefficients() {
    return {
        // Major <- Gender (baseline-category logits against Business)
        {"major.stem.intercept", -0.6},
        {"major.stem.male", 0.6},
        {"major.humanities.intercept", 0.2},
        {"major.humanities.male", -0.2},
        // SAT score and GPA <- latent aptitude
        {"sat.mean", 1050},
        {"sat.aptitude", 140},
        {"sat.noise", 70},
        {"gpa.aptitude", 0.9},
        {"gpa.noise", 0.6},
        // College rank <- SAT score
        {"rank.sat", 1.0},
        {"rank.noise", 0.6},
        // Work experience <- Age
        {"experience.age", 0.6},
        {"experience.noise", 3.0},
        // Job <- Gender, Major, Work experience, College rank, GPA, Race
        {"job.intercept", -5.2},
        {"job.male", 1.0},
        {"job.stem", 0.7},
        {"job.humanities", -0.3},
        {"job.experience", 0.18},
        {"job.tier1", 3.0},
        {"job.tier2", 1.5},
        {"job.gpa_high", 2.4},
        {"job.gpa_medium", 1.2},
        {"job.white", 0.15},
    };
}

void SynthConfig::validate() const {
    if (n < 100) throw DataError("synthetic data needs at least 100 rows");
    if (!(p_male > 0 && p_male < 1)) throw DataError("p_male must lie in (0, 1)");
    const auto defaults = default_coefficients();
    for (const auto& [k, v] : defaults)
        if (!coefficients.count(k)) throw DataError("missing generator coefficient '" + k + "'");
    for (const auto& [k, v] : coefficients) {
        if (!defaults.count(k)) throw DataError("unknown generator coefficient '" + k + "'");
        if (!std::isfinite(v)) throw DataError("generator coefficient '" + k + "' must be finite");
    }
}

tabular::Dataset generate_hiring(const SynthConfig& cfg) {
    cfg.validate();
    const auto& c = cfg.coefficients;
    auto w = [&](const char* key) { return c.at(key); };
    rng::Stream s(cfg.seed);

    using tabular::ColumnKind;
    using tabular::ColumnSpec;
    std::vector<ColumnSpec> schema{
        {"Gender", ColumnKind::nominal, {"Female", "Male"}, std::nullopt},
        {"Race", ColumnKind::nominal, {"Asian", "Black", "White"}, std::nullopt},
        {"Age", ColumnKind::numeric, {}, std::nullopt},
        {"Major", ColumnKind::nominal, {"Business", "Humanities", "STEM"}, std::nullopt},
        {"SAT score", ColumnKind::numeric, {}, std::nullopt},
        {"GPA", ColumnKind::nominal, {"High", "Low", "Medium"}, std::nullopt},
        {"College rank", ColumnKind::nominal, {"Tier 1", "Tier 2", "Tier 3"}, std::nullopt},
        {"Work experience", ColumnKind::numeric, {}, std::nullopt},
        {"Job", ColumnKind::nominal, {"No", "Yes"}, std::string("Yes")},
    };
    std::vector<std::vector<double>> cols(schema.size(), std::vector<double>(cfg.n));
    auto sigmoid = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };

    for (std::size_t i = 0; i < cfg.n; ++i) {
        const bool male = s.uniform() < cfg.p_male;
        const double ur = s.uniform();
        const int race = ur < 0.15 ? 0 : (ur < 0.30 ? 1 : 2);
        const double age = std::floor(22.0 + 38.0 * s.uniform());
        const double aptitude = s.normal();

        // Major: softmax over {Business, Humanities, STEM}
        const double e_h = std::exp(w("major.humanities.intercept") + w("major.humanities.male") * male);
        const double e_s = std::exp(w("major.stem.intercept") + w("major.stem.male") * male);
        const double um = s.uniform() * (1.0 + e_h + e_s);
        const int major = um < 1.0 ? 0 : (um < 1.0 + e_h ? 1 : 2);

        double sat = w("sat.mean") + w("sat.aptitude") * aptitude + w("sat.noise") * s.normal();
        sat = std::clamp(std::round(sat / 10.0) * 10.0, 400.0, 1600.0);

        const double g = w("gpa.aptitude") * aptitude + w("gpa.noise") * s.normal();
        const int gpa = g > 0.5 ? 0 : (g < -0.5 ? 1 : 2);

        const double r = w("rank.sat") * (sat - w("sat.mean")) / w("sat.aptitude") + w("rank.noise") * s.normal();
        const int rank = r > 0.6 ? 0 : (r > -0.4 ? 1 : 2);

        double exp_years = w("experience.age") * (age - 22.0) + w("experience.noise") * s.normal();
        exp_years = std::max(0.0, std::round(exp_years));

        const double eta = w("job.intercept") + w("job.male") * male + (major == 2 ? w("job.stem") : 0.0) +
                           (major == 1 ? w("job.humanities") : 0.0) + w("job.experience") * exp_years +
                           (rank == 0 ? w("job.tier1") : 0.0) + (rank == 1 ? w("job.tier2") : 0.0) +
                           (gpa == 0 ? w("job.gpa_high") : 0.0) + (gpa == 2 ? w("job.gpa_medium") : 0.0) +
                           (race == 2 ? w("job.white") : 0.0);
        const bool job = s.uniform() < sigmoid(eta);

        const double row[] = {male ? 1.0 : 0.0, double(race), age, double(major), sat,
                              double(gpa), double(rank), exp_years, job ? 1.0 : 0.0};
        for (std::size_t j = 0; j < schema.size(); ++j) cols[j][i] = row[j];
    }
    return tabular::Dataset("hiring", std::move(schema), std::move(cols), std::string("Job"));
}

std::string hiring_schema_json() {
    nlohmann::ordered_json j;
    for (const char* name : {"Age", "SAT score", "Work experience"}) j[name] = "numeric";
    for (const char* name : {"Gender", "Race", "Major", "GPA", "College rank", "Job"}) j[name] = "nominal";
    j["label"] = "Job";
    j["favorable"] = "Yes";
    return j.dump(2) + "\n";
}

}  // namespace causalfair::synthgen
