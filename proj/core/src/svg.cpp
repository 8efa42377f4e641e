#include "svg.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "spde/errors.hpp"

namespace spde::detail {

namespace {

std::string num(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string sci(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

const char* color_for(size_t i) {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
    return palette[i % 4];
}

} // namespace

void write_convergence_svg(const ConvergenceReport& report, const std::filesystem::path& file) {
    constexpr double width = 720, height = 540;
    constexpr double ml = 80, mr = 24, mt = 28, mb = 64;
    const double plot_w = width - ml - mr;
    const double plot_h = height - mt - mb;

    double lx_min = 0, lx_max = 0, ly_min = 0, ly_max = 0;
    bool any = false;
    for (const auto& sr : report.schemes) {
        for (const auto& p : sr.points) {
            if (!(p.resolution > 0.0) || !(p.rms_error > 0.0))
                continue;
            const double lx = std::log10(p.resolution);
            const double ly = std::log10(p.rms_error);
            if (!any) {
                lx_min = lx_max = lx;
                ly_min = ly_max = ly;
                any = true;
            } else {
                lx_min = std::min(lx_min, lx);
                lx_max = std::max(lx_max, lx);
                ly_min = std::min(ly_min, ly);
                ly_max = std::max(ly_max, ly);
            }
        }
    }
    if (!any) {
        lx_min = ly_min = -1;
        lx_max = ly_max = 0;
    }
    lx_min = std::floor(lx_min - 0.05);
    lx_max = std::ceil(lx_max + 0.05);
    ly_min = std::floor(ly_min - 0.05);
    ly_max = std::ceil(ly_max + 0.05);
    if (lx_max <= lx_min)
        lx_max = lx_min + 1;
    if (ly_max <= ly_min)
        ly_max = ly_min + 1;

    const auto px = [&](double lx) { return ml + (lx - lx_min) / (lx_max - lx_min) * plot_w; };
    const auto py = [&](double ly) { return mt + (ly_max - ly) / (ly_max - ly_min) * plot_h; };

    std::ofstream svg(file, std::ios::binary);
    if (!svg)
        throw IoError("write_convergence_svg: cannot open " + file.string());

    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    svg << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
        << "\" fill=\"white\"/>\n";
    svg << "<rect x=\"" << num(ml) << "\" y=\"" << num(mt) << "\" width=\"" << num(plot_w)
        << "\" height=\"" << num(plot_h) << "\" fill=\"none\" stroke=\"#404040\"/>\n";

    // Decade grid.
    for (int k = static_cast<int>(lx_min); k <= static_cast<int>(lx_max); ++k) {
        const double x = px(k);
        svg << "<line x1=\"" << num(x) << "\" y1=\"" << num(mt) << "\" x2=\"" << num(x)
            << "\" y2=\"" << num(mt + plot_h) << "\" stroke=\"#d9d9d9\" stroke-width=\"0.7\"/>\n";
        svg << "<text x=\"" << num(x) << "\" y=\"" << num(mt + plot_h + 20)
            << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">1e" << k
            << "</text>\n";
    }
    for (int k = static_cast<int>(ly_min); k <= static_cast<int>(ly_max); ++k) {
        const double y = py(k);
        svg << "<line x1=\"" << num(ml) << "\" y1=\"" << num(y) << "\" x2=\"" << num(ml + plot_w)
            << "\" y2=\"" << num(y) << "\" stroke=\"#d9d9d9\" stroke-width=\"0.7\"/>\n";
        svg << "<text x=\"" << num(ml - 8) << "\" y=\"" << num(y + 4)
            << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">1e" << k
            << "</text>\n";
    }

    const char* xlabel = report.kind == "spatial" ? "mesh size h" : "time step";
    svg << "<text x=\"" << num(ml + plot_w / 2) << "\" y=\"" << num(height - 16)
        << "\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">" << xlabel
        << "</text>\n";
    svg << "<text x=\"20\" y=\"" << num(mt + plot_h / 2)
        << "\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 20 "
        << num(mt + plot_h / 2) << ")\">rms error</text>\n";

    double legend_y = mt + 18;
    for (size_t si = 0; si < report.schemes.size(); ++si) {
        const auto& sr = report.schemes[si];
        const char* color = color_for(si);

        std::string polyline;
        for (const auto& p : sr.points) {
            if (!(p.resolution > 0.0) || !(p.rms_error > 0.0))
                continue;
            polyline += num(px(std::log10(p.resolution)));
            polyline += ',';
            polyline += num(py(std::log10(p.rms_error)));
            polyline += ' ';
        }
        if (!polyline.empty())
            svg << "<polyline points=\"" << polyline << "\" fill=\"none\" stroke=\"" << color
                << "\" stroke-width=\"1.8\"/>\n";
        for (const auto& p : sr.points) {
            if (!(p.resolution > 0.0) || !(p.rms_error > 0.0))
                continue;
            svg << "<circle cx=\"" << num(px(std::log10(p.resolution))) << "\" cy=\""
                << num(py(std::log10(p.rms_error))) << "\" r=\"3.2\" fill=\"" << color << "\"/>\n";
        }

        svg << "<rect x=\"" << num(ml + 14) << "\" y=\"" << num(legend_y - 9)
            << "\" width=\"12\" height=\"12\" fill=\"" << color << "\"/>\n";
        svg << "<text x=\"" << num(ml + 32) << "\" y=\"" << num(legend_y + 2)
            << "\" font-family=\"sans-serif\" font-size=\"13\">" << scheme_name(sr.scheme);
        if (std::isfinite(sr.fitted_order))
            svg << " (order " << sci(sr.fitted_order) << ")";
        svg << "</text>\n";
        legend_y += 20;
    }

    svg << "</svg>\n";
    if (!svg.flush())
        throw IoError("write_convergence_svg: write failed");
}

} // namespace spde::detail
