#include "phasemap/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "phasemap/errors.hpp"

namespace phasemap::svg {

namespace {

constexpr int kCell = 36;
constexpr int kLeft = 70;
constexpr int kBottom = 70;
constexpr int kTop = 40;
constexpr int kRight = 20;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string hex(int r, int g, int b) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", std::clamp(r, 0, 255), std::clamp(g, 0, 255),
                  std::clamp(b, 0, 255));
    return buf;
}

int lerp(int a, int b, double t) { return static_cast<int>(std::lround(a + (b - a) * t)); }

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            default: out += c;
        }
    }
    return out;
}

void header(std::ostringstream& os, int w, int h) {
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
       << "\" viewBox=\"0 0 " << w << ' ' << h << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    os << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"#ffffff\"/>\n";
}

}  // namespace

std::string color_for(double value, ColorScale scale, double lo, double hi) {
    if (!std::isfinite(value)) return "#d0d0d0";
    if (scale == ColorScale::diverging) {
        const double bound = std::max({std::fabs(lo), std::fabs(hi), 1e-12});
        const double t = std::clamp(value / bound, -1.0, 1.0);
        if (t < 0) return hex(lerp(255, 178, -t), lerp(255, 24, -t), lerp(255, 43, -t));
        return hex(lerp(255, 33, t), lerp(255, 102, t), lerp(255, 172, t));
    }
    const double span = hi > lo ? hi - lo : 1.0;
    const double t = std::clamp((value - lo) / span, 0.0, 1.0);
    return hex(lerp(255, 8, t), lerp(255, 48, t), lerp(255, 107, t));
}

std::string render_heatmap(const Heatmap& map) {
    const auto nx = static_cast<int>(map.xs.size());
    const auto ny = static_cast<int>(map.ys.size());
    if (nx == 0 || ny == 0) throw PreconditionError("heatmap needs a non-empty grid");
    if (static_cast<int>(map.values.size()) != nx)
        throw ShapeMismatch("heatmap values do not match the x grid");
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& col : map.values) {
        if (static_cast<int>(col.size()) != ny) throw ShapeMismatch("heatmap column length");
        for (double v : col)
            if (std::isfinite(v)) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
    }
    if (!std::isfinite(lo)) lo = hi = 0.0;
    if (map.scale == ColorScale::diverging) {
        const double b = std::max(std::fabs(lo), std::fabs(hi));
        lo = -b;
        hi = b;
    }

    const int w = kLeft + nx * kCell + kRight + 90;
    const int h = kTop + ny * kCell + kBottom;
    std::ostringstream os;
    header(os, w, h);
    os << "<text x=\"" << kLeft << "\" y=\"22\" font-size=\"14\">" << escape(map.title) << "</text>\n";
    for (int ix = 0; ix < nx; ++ix)
        for (int iy = 0; iy < ny; ++iy) {
            const double v = map.values[ix][iy];
            const int x = kLeft + ix * kCell;
            const int y = kTop + (ny - 1 - iy) * kCell;
            os << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << kCell << "\" height=\""
               << kCell << "\" fill=\"" << color_for(v, map.scale, lo, hi)
               << "\" stroke=\"#ffffff\" stroke-width=\"0.5\"><title>(" << num(map.xs[ix]) << ", "
               << num(map.ys[iy]) << ") = " << (std::isfinite(v) ? num(v) : "missing")
               << "</title></rect>\n";
            if (!std::isfinite(v))
                os << "<path d=\"M" << x + 6 << ' ' << y + 6 << " L" << x + kCell - 6 << ' '
                   << y + kCell - 6 << " M" << x + kCell - 6 << ' ' << y + 6 << " L" << x + 6 << ' '
                   << y + kCell - 6 << "\" stroke=\"#808080\"/>\n";
        }
    for (int ix = 0; ix < nx; ++ix)
        os << "<text x=\"" << kLeft + ix * kCell + kCell / 2 << "\" y=\"" << kTop + ny * kCell + 16
           << "\" text-anchor=\"middle\">" << num(map.xs[ix]) << "</text>\n";
    for (int iy = 0; iy < ny; ++iy)
        os << "<text x=\"" << kLeft - 6 << "\" y=\"" << kTop + (ny - 1 - iy) * kCell + kCell / 2 + 4
           << "\" text-anchor=\"end\">" << num(map.ys[iy]) << "</text>\n";
    os << "<text x=\"" << kLeft + nx * kCell / 2 << "\" y=\"" << kTop + ny * kCell + 40
       << "\" text-anchor=\"middle\">" << escape(map.x_label) << "</text>\n";
    os << "<text x=\"18\" y=\"" << kTop + ny * kCell / 2 << "\" transform=\"rotate(-90 18 "
       << kTop + ny * kCell / 2 << ")\" text-anchor=\"middle\">" << escape(map.y_label) << "</text>\n";

    // Stars: data coordinates interpolated linearly between cell centres.
    auto px = [&](const std::vector<double>& grid, double v, bool vertical) {
        const int n = static_cast<int>(grid.size());
        double pos = 0.0;
        if (n == 1) {
            pos = 0.0;
        } else {
            int k = 0;
            while (k < n - 2 && v > grid[k + 1]) ++k;
            pos = k + (v - grid[k]) / (grid[k + 1] - grid[k]);
        }
        if (vertical) return kTop + (n - 1 - pos) * kCell + kCell / 2.0;
        return kLeft + pos * kCell + kCell / 2.0;
    };
    for (const auto& s : map.stars)
        os << "<text x=\"" << num(px(map.xs, s.x, false)) << "\" y=\"" << num(px(map.ys, s.y, true) + 5)
           << "\" text-anchor=\"middle\" font-size=\"14\" fill=\"#000000\">*</text>\n";

    // Legend bar.
    const int lx = kLeft + nx * kCell + 30;
    for (int k = 0; k < 10; ++k) {
        const double v = hi - (hi - lo) * k / 9.0;
        os << "<rect x=\"" << lx << "\" y=\"" << kTop + k * 14 << "\" width=\"14\" height=\"14\" fill=\""
           << color_for(v, map.scale, lo, hi) << "\"/>\n";
    }
    os << "<text x=\"" << lx + 18 << "\" y=\"" << kTop + 10 << "\">" << num(hi) << "</text>\n";
    os << "<text x=\"" << lx + 18 << "\" y=\"" << kTop + 9 * 14 + 10 << "\">" << num(lo) << "</text>\n";
    os << "</svg>\n";
    return os.str();
}

std::string render_scatter(const std::string& title, const Matrix& init, const Matrix& final) {
    if (init.cols() < 2 || final.cols() < 2) throw ShapeMismatch("scatter needs 2-d points");
    double extent = 1e-12;
    for (const Matrix* m : {&init, &final})
        extent = std::max(extent, m->leftCols(2).cwiseAbs().maxCoeff());
    constexpr int size = 400;
    constexpr int margin = 40;
    const double scale = (size / 2.0 - 10) / extent;
    auto sx = [&](double v) { return num(margin + size / 2.0 + v * scale); };
    auto sy = [&](double v) { return num(margin + size / 2.0 - v * scale); };

    std::ostringstream os;
    header(os, size + 2 * margin, size + 2 * margin);
    os << "<text x=\"" << margin << "\" y=\"24\" font-size=\"14\">" << escape(title) << "</text>\n";
    os << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << size << "\" height=\""
       << size << "\" fill=\"none\" stroke=\"#000000\"/>\n";
    os << "<line x1=\"" << margin << "\" y1=\"" << margin + size / 2 << "\" x2=\"" << margin + size
       << "\" y2=\"" << margin + size / 2 << "\" stroke=\"#c0c0c0\"/>\n";
    os << "<line x1=\"" << margin + size / 2 << "\" y1=\"" << margin << "\" x2=\"" << margin + size / 2
       << "\" y2=\"" << margin + size << "\" stroke=\"#c0c0c0\"/>\n";
    os << "<g fill=\"#d62728\" fill-opacity=\"0.6\">\n";
    for (Eigen::Index i = 0; i < init.rows(); ++i)
        os << "<circle cx=\"" << sx(init(i, 0)) << "\" cy=\"" << sy(init(i, 1)) << "\" r=\"1.5\"/>\n";
    os << "</g>\n<g fill=\"#2ca02c\" fill-opacity=\"0.6\">\n";
    for (Eigen::Index i = 0; i < final.rows(); ++i)
        os << "<circle cx=\"" << sx(final(i, 0)) << "\" cy=\"" << sy(final(i, 1)) << "\" r=\"1.5\"/>\n";
    os << "</g>\n";
    os << "<text x=\"" << margin << "\" y=\"" << size + margin + 16 << "\">axis half-width "
       << num(extent) << "; red init, green final</text>\n";
    os << "</svg>\n";
    return os.str();
}

std::string render_matrix(const std::string& title, const Matrix& values, int max_cells) {
    const auto k = values.rows();
    if (k == 0 || values.cols() != k) throw ShapeMismatch("matrix plot needs a square matrix");
    const int cells = static_cast<int>(std::min<Eigen::Index>(k, std::max(1, max_cells)));
    const double block = static_cast<double>(k) / cells;
    const int px = std::max(1, 600 / cells);
    constexpr int margin = 40;
    std::ostringstream os;
    header(os, cells * px + 2 * margin, cells * px + 2 * margin);
    os << "<text x=\"" << margin << "\" y=\"24\" font-size=\"14\">" << escape(title) << "</text>\n";
    for (int i = 0; i < cells; ++i)
        for (int j = 0; j < cells; ++j) {
            const auto r0 = static_cast<Eigen::Index>(std::floor(i * block));
            const auto r1 = std::max(r0 + 1, static_cast<Eigen::Index>(std::floor((i + 1) * block)));
            const auto c0 = static_cast<Eigen::Index>(std::floor(j * block));
            const auto c1 = std::max(c0 + 1, static_cast<Eigen::Index>(std::floor((j + 1) * block)));
            const double v = values.block(r0, c0, r1 - r0, c1 - c0).mean();
            os << "<rect x=\"" << margin + j * px << "\" y=\"" << margin + i * px << "\" width=\"" << px
               << "\" height=\"" << px << "\" fill=\"" << color_for(v, ColorScale::diverging, -1, 1)
               << "\"/>\n";
        }
    os << "<text x=\"" << margin << "\" y=\"" << cells * px + margin + 16
       << "\">blue: D ~ 1, red: D ~ -1; " << k << " rows</text>\n";
    os << "</svg>\n";
    return os.str();
}

}  // namespace phasemap::svg
