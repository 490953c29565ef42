#include "btda/harness/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

namespace btda::harness {

namespace {

namespace fs = std::filesystem;

std::string fmt(double v, const char* spec = "%.3g") {
    if (std::isnan(v)) return "n/a";
    char buf[40];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

void write_svg(const fs::path& path, const std::string& body, int width, int height) {
    std::string doc = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                      std::to_string(width) + "\" height=\"" + std::to_string(height) +
                      "\" font-family=\"monospace\" font-size=\"11\">\n" + body + "</svg>\n";
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        os << doc;
    }
    fs::rename(tmp, path);
}

std::string rect(double x, double y, double w, double h, const std::string& fill,
                 const std::string& stroke = "none") {
    return "<rect x=\"" + fmt(x, "%.1f") + "\" y=\"" + fmt(y, "%.1f") + "\" width=\"" +
           fmt(w, "%.1f") + "\" height=\"" + fmt(h, "%.1f") + "\" fill=\"" + fill +
           "\" stroke=\"" + stroke + "\"/>\n";
}

std::string text(double x, double y, const std::string& s,
                 const std::string& anchor = "start", const std::string& extra = "") {
    return "<text x=\"" + fmt(x, "%.1f") + "\" y=\"" + fmt(y, "%.1f") + "\" text-anchor=\"" +
           anchor + "\" " + extra + ">" + s + "</text>\n";
}

/// [-1, 1] -> blue/white/red; NaN -> gray.
std::string heat_color(double v) {
    if (std::isnan(v)) return "rgb(200,200,200)";
    v = std::clamp(v, -1.0, 1.0);
    const int other = static_cast<int>(std::lround(255.0 * (1.0 - std::abs(v))));
    char buf[32];
    if (v >= 0.0) {
        std::snprintf(buf, sizeof(buf), "rgb(255,%d,%d)", other, other);
    } else {
        std::snprintf(buf, sizeof(buf), "rgb(%d,%d,255)", other, other);
    }
    return buf;
}

std::string histogram_svg(const std::string& title, const PValueHistogram& hist) {
    const int width = 480, height = 320;
    const double left = 50, right = 20, top = 40, bottom = 40;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;
    const std::size_t bins = hist.counts.size();

    Index max_count = 1;
    for (Index c : hist.counts) max_count = std::max(max_count, c);

    std::string body;
    body += text(width / 2.0, 20, title, "middle", "font-size=\"13\"");
    body += text(width / 2.0, height - 8, "p-value", "middle");
    body += rect(left, top, plot_w, plot_h, "none", "black");
    for (std::size_t b = 0; b < bins; ++b) {
        const double frac = static_cast<double>(hist.counts[b]) /
                            static_cast<double>(max_count);
        const double bw = plot_w / static_cast<double>(bins);
        const double bh = frac * plot_h;
        const double x = left + static_cast<double>(b) * bw;
        body += rect(x + 1, top + plot_h - bh, bw - 2, bh, "rgb(90,140,200)");
        body += text(x + bw / 2.0, top + plot_h - bh - 3,
                     std::to_string(hist.counts[b]), "middle", "font-size=\"10\"");
        body += text(x, top + plot_h + 14,
                     fmt(static_cast<double>(b) / static_cast<double>(bins), "%.1f"),
                     "middle", "font-size=\"9\"");
    }
    body += text(left + plot_w, top + plot_h + 14, "1.0", "middle", "font-size=\"9\"");
    body += text(left, 34,
                 "n = " + std::to_string(hist.n) +
                     ", frac(p&lt;0.05) = " + fmt(hist.low_noise_fraction, "%.4f"));
    return std::string("<g>") + body + "</g>\n";
}

std::string heat_grid_svg(const std::string& title, const std::vector<Method>& methods,
                          const Matrix& values, double y_offset) {
    const double cell = 52, label_w = 64, top = y_offset + 28;
    std::string body;
    body += text(label_w, y_offset + 16, title, "start", "font-size=\"13\"");
    const Index k = values.rows();
    for (Index c = 0; c < k; ++c) {
        body += text(label_w + cell * (c + 0.5), top - 4,
                     method_name(methods[static_cast<std::size_t>(c)]), "middle");
    }
    for (Index r = 0; r < k; ++r) {
        body += text(label_w - 6, top + cell * (r + 0.55),
                     method_name(methods[static_cast<std::size_t>(r)]), "end");
        for (Index c = 0; c < k; ++c) {
            const double v = values(r, c);
            body += rect(label_w + cell * c, top + cell * r, cell - 1, cell - 1,
                         heat_color(v), "black");
            body += text(label_w + cell * (c + 0.5), top + cell * (r + 0.55),
                         fmt(v, "%.2f"), "middle", "font-size=\"10\"");
        }
    }
    return body;
}

}  // namespace

void emit_plots(const ExperimentReport& report, const fs::path& out_dir) {
    if (report.summaries.empty()) {
        std::cerr << "[btda] emit_plots: empty method set, no plots written\n";
        return;
    }
    fs::create_directories(out_dir);

    for (const auto& [method, hist] : report.histograms) {
        const std::string name = method_name(method);
        write_svg(out_dir / ("hist_p_" + name + ".svg"),
                  histogram_svg("p-values: " + name, hist), 480, 320);
    }

    for (const auto& [kind, corr] : report.correlations) {
        const Index k = static_cast<Index>(corr.methods.size());
        const double grid_h = 28 + 52.0 * static_cast<double>(k) + 24;
        std::string body;
        body += heat_grid_svg(std::string("Pearson r (") + pair_statistic_name(kind) +
                                  ", n=" + std::to_string(corr.n_pairs) + ")",
                              corr.methods, corr.pearson_matrix, 8);
        body += heat_grid_svg(std::string("Spearman rho (") + pair_statistic_name(kind) + ")",
                              corr.methods, corr.spearman_matrix, 8 + grid_h);
        const int width = 64 + 52 * static_cast<int>(k) + 20;
        const int height = static_cast<int>(2 * grid_h + 24);
        write_svg(out_dir / (std::string("corr_") + pair_statistic_name(kind) + ".svg"),
                  body, width, height);
    }
}

void emit_size_sweep_chart(
    const std::vector<std::pair<Index, std::map<Method, double>>>& mean_p_by_size,
    const fs::path& path) {
    const int width = 520, height = 360;
    const double left = 60, right = 150, top = 40, bottom = 50;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;

    std::string body;
    body += text(width / 2.0, 20, "mean p-value vs training set size", "middle",
                 "font-size=\"13\"");
    body += rect(left, top, plot_w, plot_h, "none", "black");
    body += text(left + plot_w / 2.0, height - 12, "N train", "middle");

    if (mean_p_by_size.empty()) {
        write_svg(path, body, width, height);
        return;
    }

    double n_min = 1e300, n_max = -1e300;
    for (const auto& [n, _] : mean_p_by_size) {
        n_min = std::min(n_min, static_cast<double>(n));
        n_max = std::max(n_max, static_cast<double>(n));
    }
    if (n_max == n_min) n_max = n_min + 1;

    const auto x_of = [&](Index n) {
        return left + plot_w * (static_cast<double>(n) - n_min) / (n_max - n_min);
    };
    const auto y_of = [&](double p) { return top + plot_h * (1.0 - std::clamp(p, 0.0, 1.0)); };

    for (double tick : {0.0, 0.5, 1.0}) {
        body += text(left - 8, y_of(tick) + 4, fmt(tick, "%.1f"), "end", "font-size=\"9\"");
    }

    static const char* kColors[] = {"rgb(60,60,60)",   "rgb(200,80,80)", "rgb(70,120,200)",
                                    "rgb(90,160,90)",  "rgb(180,130,60)", "rgb(140,90,170)"};
    int color_index = 0;
    double legend_y = top + 10;
    for (Method m : all_methods()) {
        bool present = false;
        for (const auto& [n, mp] : mean_p_by_size) present = present || mp.count(m) > 0;
        if (!present) continue;
        const std::string color = kColors[color_index++ % 6];

        std::string points;
        for (const auto& [n, mp] : mean_p_by_size) {
            const auto it = mp.find(m);
            if (it == mp.end() || std::isnan(it->second)) continue;
            const double x = x_of(n), y = y_of(it->second);
            points += fmt(x, "%.1f") + "," + fmt(y, "%.1f") + " ";
            body += "<circle cx=\"" + fmt(x, "%.1f") + "\" cy=\"" + fmt(y, "%.1f") +
                    "\" r=\"3\" fill=\"" + color + "\"/>\n";
            body += text(x + 5, y - 5, fmt(it->second, "%.3f"), "start", "font-size=\"9\"");
            body += text(x, top + plot_h + 14, std::to_string(n), "middle",
                         "font-size=\"9\"");
        }
        body += "<polyline fill=\"none\" stroke=\"" + color + "\" points=\"" + points +
                "\"/>\n";
        body += text(width - right + 16, legend_y, method_name(m), "start",
                     "fill=\"" + color + "\"");
        legend_y += 16;
    }
    write_svg(path, body, width, height);
}

}  // namespace btda::harness
