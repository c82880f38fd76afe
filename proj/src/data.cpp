#include "phasemap/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "phasemap/errors.hpp"
#include "phasemap/output.hpp"

namespace phasemap {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes;
    std::uint8_t buf[1 << 16];
    for (;;) {
        const int got = gzread(f, buf, sizeof buf);
        if (got < 0) {
            gzclose(f);
            throw FormatError("corrupt compressed stream in " + path.string());
        }
        if (got == 0) break;
        bytes.insert(bytes.end(), buf, buf + got);
    }
    gzclose(f);
    return bytes;
}

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t at) {
    return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
           (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

void put_be32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) b.push_back(static_cast<std::uint8_t>(v >> shift));
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    if (path.extension() == ".gz") {
        gzFile f = gzopen(path.c_str(), "wb9");
        if (!f) throw IoError("cannot open " + path.string() + " for writing");
        const int wrote = gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
        gzclose(f);
        if (wrote != static_cast<int>(bytes.size())) throw IoError("failed writing " + path.string());
        return;
    }
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace

SyntheticSpec SyntheticSpec::defaults() {
    return {{{-1.0, 0.2}, {-0.5, -0.4}, {0.5, 0.6}, {1.0, -0.3}}};
}

void SyntheticSpec::validate() const {
    if (points.empty()) throw InvalidConfig("synthetic dataset needs at least one point");
    std::set<double> xs;
    for (const auto& [x, y] : points) {
        if (!std::isfinite(x) || !std::isfinite(y)) throw InvalidConfig("synthetic point not finite");
        if (!xs.insert(x).second)
            throw InvalidConfig("duplicate synthetic x value " + format_double(x));
    }
}

Dataset synthetic_1d(const SyntheticSpec& spec) {
    spec.validate();
    const auto n = static_cast<Eigen::Index>(spec.points.size());
    Dataset data{Matrix(n, 1), Matrix(n, 1)};
    for (Eigen::Index i = 0; i < n; ++i) {
        data.x(i, 0) = spec.points[static_cast<std::size_t>(i)].first;
        data.y(i, 0) = spec.points[static_cast<std::size_t>(i)].second;
    }
    return data;
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::int64_t limit) {
    if (limit < 1) throw InvalidConfig("limit must be at least 1 (empty dataset)");
    const auto img = read_all(images);
    const auto lab = read_all(labels);
    if (img.size() < 16 || be32(img, 0) != kImageMagic)
        throw FormatError(images.string() + ": bad IDX image magic");
    if (lab.size() < 8 || be32(lab, 0) != kLabelMagic)
        throw FormatError(labels.string() + ": bad IDX label magic");

    const std::uint64_t count = be32(img, 4);
    const std::uint64_t rows = be32(img, 8);
    const std::uint64_t cols = be32(img, 12);
    const std::uint64_t label_count = be32(lab, 4);
    if (count != label_count)
        throw FormatError("image count " + std::to_string(count) + " != label count " +
                          std::to_string(label_count));
    const std::uint64_t pixels = rows * cols;
    if (pixels == 0) throw FormatError(images.string() + ": zero-sized images");
    if ((img.size() - 16) / pixels < count) throw FormatError(images.string() + ": truncated");
    if (lab.size() - 8 < count) throw FormatError(labels.string() + ": truncated");
    if (count == 0) throw FormatError("IDX files contain no samples");

    const auto n = static_cast<Eigen::Index>(std::min<std::uint64_t>(count, limit));
    Dataset data{Matrix(n, static_cast<Eigen::Index>(pixels)), Matrix::Zero(n, 10)};
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::size_t base = 16 + static_cast<std::size_t>(i) * pixels;
        for (std::size_t p = 0; p < pixels; ++p)
            data.x(i, static_cast<Eigen::Index>(p)) = img[base + p] / 255.0;
        const std::uint8_t label = lab[8 + static_cast<std::size_t>(i)];
        if (label > 9) throw FormatError("label " + std::to_string(label) + " outside 0..9");
        data.y(i, label) = 1.0;
    }
    return data;
}

void write_idx_images(const std::filesystem::path& path, std::span<const std::uint8_t> pixels,
                      std::uint32_t count, std::uint32_t rows, std::uint32_t cols) {
    if (pixels.size() != std::size_t{count} * rows * cols)
        throw ShapeMismatch("pixel buffer does not match count x rows x cols");
    std::vector<std::uint8_t> bytes;
    bytes.reserve(16 + pixels.size());
    put_be32(bytes, kImageMagic);
    put_be32(bytes, count);
    put_be32(bytes, rows);
    put_be32(bytes, cols);
    bytes.insert(bytes.end(), pixels.begin(), pixels.end());
    write_bytes(path, bytes);
}

void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels) {
    std::vector<std::uint8_t> bytes;
    bytes.reserve(8 + labels.size());
    put_be32(bytes, kLabelMagic);
    put_be32(bytes, static_cast<std::uint32_t>(labels.size()));
    bytes.insert(bytes.end(), labels.begin(), labels.end());
    write_bytes(path, bytes);
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data) {
    data.validate();
    CsvWriter csv(path);
    std::vector<std::string> header;
    for (Eigen::Index j = 0; j < data.input_dim(); ++j) header.push_back("x" + std::to_string(j));
    for (Eigen::Index j = 0; j < data.output_dim(); ++j) header.push_back("y" + std::to_string(j));
    csv.row(header);
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        std::vector<std::string> cells;
        for (Eigen::Index j = 0; j < data.input_dim(); ++j) cells.push_back(format_double(data.x(i, j)));
        for (Eigen::Index j = 0; j < data.output_dim(); ++j) cells.push_back(format_double(data.y(i, j)));
        csv.row(cells);
    }
}

}  // namespace phasemap
