#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"

#include "phasemap/data.hpp"
#include "phasemap/experiment.hpp"
#include "phasemap/scaling.hpp"

namespace phasemap {

// How a run's initialization is specified in a config file. Exactly one of
// a named preset, a (gamma2, gamma3) point, or explicit laws.
struct ExplicitLaws {
    PowerLaw alpha, beta1, beta2, beta3;
    std::optional<Rational> B;
};

struct ModelSpec {
    std::variant<Preset, GammaPoint, ExplicitLaws> source = GammaPoint{};
    std::string label;

    HyperConfig resolve(std::int64_t m, std::int64_t d, std::int64_t d_out, bool layer2_bias) const;
};

struct IdxSource {
    std::filesystem::path images;
    std::filesystem::path labels;
    std::int64_t limit = 100;
};

struct DataSpec {
    std::variant<SyntheticSpec, IdxSource> source = SyntheticSpec::defaults();

    Dataset load() const;
};

struct RunConfig {
    ModelSpec model;
    std::vector<ModelSpec> group;  // `report`
    bool layer2_bias = false;
    DataSpec data;
    std::int64_t width = 1000;  // `train`
    std::vector<std::int64_t> widths{100, 500, 1000, 2000, 5000};
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7};
    std::vector<double> gamma2_grid;
    std::vector<double> gamma3_grid;
    ExperimentSchedule schedule;
};

// Named width lists: "desk" {100,500,1000,2000,5000}, "large"
// {100,1000,2000,5000,10000}, "large2500" {100,1000,2500,5000,10000}.
std::vector<std::int64_t> width_preset(const std::string& name);

std::vector<double> default_gamma2_grid();
std::vector<double> default_gamma3_grid();

// Relative paths inside the document are resolved against base_dir.
RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

nlohmann::json to_json(const PowerLaw& law);
nlohmann::json to_json(const HyperConfig& config);
nlohmann::json to_json(const ExperimentSchedule& schedule);
// Canonical echo of the resolved configuration; hashed for manifests.
nlohmann::json to_json(const RunConfig& config);

std::string config_hash(const RunConfig& config);

}  // namespace phasemap
