#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "phasemap/model.hpp"

namespace phasemap {

// One-dimensional regression task given as (x, y) pairs.
struct SyntheticSpec {
    std::vector<std::pair<double, double>> points;

    // x = (-1, -0.5, 0.5, 1), y = (0.2, -0.4, 0.6, -0.3).
    static SyntheticSpec defaults();
    void validate() const;
};

Dataset synthetic_1d(const SyntheticSpec& spec = SyntheticSpec::defaults());

// Reads an IDX image file (magic 0x00000803) and label file (0x00000801),
// plain or gzip-compressed. Pixels are scaled to [0, 1], labels one-hot
// encoded over 10 classes, and only the first `limit` samples are kept.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::int64_t limit);

// Writers for the same format; a ".gz" suffix selects gzip compression.
void write_idx_images(const std::filesystem::path& path, std::span<const std::uint8_t> pixels,
                      std::uint32_t count, std::uint32_t rows, std::uint32_t cols);
void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels);

// Columns x0..x{d-1}, y0..y{d_out-1}; 17 significant digits.
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);

}  // namespace phasemap
