#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "phasemap/model.hpp"

namespace phasemap::svg {

enum class ColorScale {
    // Symmetric around zero: negative red, zero white, positive blue.
    diverging,
    // [lo, hi] mapped white -> dark blue.
    sequential,
};

struct Marker {
    double x;
    double y;
};

// values[ix][iy] at (xs[ix], ys[iy]); NaN cells are drawn as missing.
// Fixed geometry: 36 px cells, 70 px left/bottom margin, 40 px top margin.
struct Heatmap {
    std::string title;
    std::string x_label = "gamma2";
    std::string y_label = "gamma3";
    std::vector<double> xs;
    std::vector<double> ys;
    std::vector<std::vector<double>> values;
    ColorScale scale = ColorScale::diverging;
    std::vector<Marker> stars;  // drawn in data coordinates
};

std::string render_heatmap(const Heatmap& map);

// Two scatter series (init and final) of 2-d points in a 400x400 frame.
std::string render_scatter(const std::string& title, const Matrix& init, const Matrix& final);

// Signed cosine matrix, block-averaged down to at most max_cells per side.
std::string render_matrix(const std::string& title, const Matrix& values, int max_cells = 200);

std::string color_for(double value, ColorScale scale, double lo, double hi);

}  // namespace phasemap::svg
