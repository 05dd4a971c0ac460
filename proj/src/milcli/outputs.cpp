#include "sgmil/milcli/outputs.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>

#include "sgmil/errors.hpp"
#include "sgmil/kernels/kernels.hpp"
#include "sgmil/version.hpp"

namespace sgmil::milcli {

namespace {

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string axis_label(const std::string& v) { return v.empty() ? "-" : v; }

void write_atomic(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write '" + tmp.string() + "'");
        out << content;
        if (!out.flush()) throw IoError("short write to '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

std::string metrics_csv(const ResultTable& table, bool wall_clock) {
    std::string out = "axis_value,seed,test_auc,test_iou,final_train_loss,wall_seconds\n";
    for (const auto& r : table.runs) {
        out += axis_label(r.axis_value) + "," + std::to_string(r.seed) + "," + num(r.test_auc) + "," +
               num(r.test_iou) + "," + num(r.final_train_loss()) + "," + num(wall_clock ? r.wall_seconds : 0.0) + "\n";
    }
    if (!table.axis.empty()) {
        for (const auto& a : table.aggregates) {
            out += axis_label(a.axis_value) + ",AGG," + num(a.mean_auc) + "," + num(a.min_auc) + "," +
                   num(a.max_auc) + "," + num(a.mean_iou) + "," + num(a.min_iou) + "," + num(a.max_iou) + "\n";
        }
    }
    return out;
}

std::string manifest_json(const ExperimentConfig& cfg, const ResultTable& table) {
    nlohmann::json j;
    j["config_hash"] = config_hash(cfg);
    j["config"] = canonical_entries(cfg);
    j["seeds"] = cfg.seeds;
    j["sweep_axis"] = table.axis;
    j["versions"] = {{"mil", std::string(kVersion)},
                     {"compiler", std::string(__VERSION__)},
                     {"kernels", std::string(kernels::active().name)}};
    auto& runs = j["runs"] = nlohmann::json::array();
    for (const auto& r : table.runs) {
        nlohmann::json losses = nlohmann::json::array();
        for (double l : r.epoch_loss) losses.push_back(finite_or_null(l));
        runs.push_back({{"axis_value", r.axis_value},
                        {"seed", r.seed},
                        {"config_hash", r.config_hash},
                        {"test_auc", finite_or_null(r.test_auc)},
                        {"test_iou", finite_or_null(r.test_iou)},
                        {"localization_accuracy", finite_or_null(r.localization_accuracy)},
                        {"epoch_loss", losses},
                        {"wall_seconds", r.wall_seconds}});
    }
    return j.dump(2) + "\n";
}

std::string metric_svg(const ResultTable& table, const std::string& metric) {
    if (metric != "auc" && metric != "iou") throw UsageError("unknown chart metric '" + metric + "'");
    const bool is_auc = metric == "auc";
    const auto& rows = table.aggregates;
    constexpr double W = 480, H = 300, L = 60, R = 20, T = 30, B = 50;
    const double plot_w = W - L - R, plot_h = H - T - B;
    const auto x_of = [&](std::size_t i) {
        return rows.size() < 2 ? L + plot_w / 2 : L + plot_w * static_cast<double>(i) / static_cast<double>(rows.size() - 1);
    };
    const auto y_of = [&](double v) { return T + plot_h * (1.0 - std::clamp(std::isfinite(v) ? v : 0.0, 0.0, 1.0)); };

    std::string s;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" font-family=\"sans-serif\" "
                  "font-size=\"11\">\n",
                  W, H);
    s += buf;
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    std::snprintf(buf, sizeof buf, "<text x=\"%.0f\" y=\"18\" text-anchor=\"middle\">test %s vs %s</text>\n", W / 2,
                  metric.c_str(), table.axis.empty() ? "run" : table.axis.c_str());
    s += buf;
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.0f\" y1=\"%.0f\" x2=\"%.0f\" y2=\"%.0f\" stroke=\"black\"/>\n"
                  "<line x1=\"%.0f\" y1=\"%.0f\" x2=\"%.0f\" y2=\"%.0f\" stroke=\"black\"/>\n",
                  L, T, L, T + plot_h, L, T + plot_h, L + plot_w, T + plot_h);
    s += buf;
    for (int k = 0; k <= 4; ++k) {
        const double v = k / 4.0;
        std::snprintf(buf, sizeof buf, "<text x=\"%.0f\" y=\"%.1f\" text-anchor=\"end\">%.2f</text>\n", L - 6,
                      y_of(v) + 4, v);
        s += buf;
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.0f\" text-anchor=\"middle\">%s</text>\n", x_of(i),
                      T + plot_h + 16, axis_label(rows[i].axis_value).c_str());
        s += buf;
    }
    struct Series {
        const char* name;
        const char* colour;
        const char* dash;
        double AggregateRow::*auc_field;
        double AggregateRow::*iou_field;
    };
    const Series series[] = {{"mean", "#1f4e9c", "", &AggregateRow::mean_auc, &AggregateRow::mean_iou},
                             {"min", "#888888", "4,3", &AggregateRow::min_auc, &AggregateRow::min_iou},
                             {"max", "#888888", "1,3", &AggregateRow::max_auc, &AggregateRow::max_iou}};
    for (std::size_t k = 0; k < 3; ++k) {
        const auto& ser = series[k];
        std::string points;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const double v = rows[i].*(is_auc ? ser.auc_field : ser.iou_field);
            std::snprintf(buf, sizeof buf, "%s%.1f,%.1f", i ? " " : "", x_of(i), y_of(v));
            points += buf;
        }
        s += "<polyline fill=\"none\" stroke=\"" + std::string(ser.colour) + "\" stroke-width=\"2\"" +
             (*ser.dash ? " stroke-dasharray=\"" + std::string(ser.dash) + "\"" : std::string()) + " points=\"" +
             points + "\"/>\n";
        std::snprintf(buf, sizeof buf, "<text x=\"%.0f\" y=\"%.0f\" fill=\"%s\">%s</text>\n", L + 8 + 50.0 * k,
                      H - 10, ser.colour, ser.name);
        s += buf;
    }
    s += "</svg>\n";
    return s;
}

void emit_outputs(const std::filesystem::path& dir, const ExperimentConfig& cfg, const ResultTable& table, bool force) {
    const auto csv_path = dir / "metrics.csv";
    if (std::filesystem::exists(csv_path) && !force)
        throw IoError("'" + csv_path.string() + "' already exists; pass --force to overwrite");
    std::filesystem::create_directories(dir);
    write_atomic(csv_path, metrics_csv(table, cfg.wall_clock));
    write_atomic(dir / "manifest.json", manifest_json(cfg, table));
    if (!table.axis.empty()) {
        write_atomic(dir / "auc.svg", metric_svg(table, "auc"));
        write_atomic(dir / "iou.svg", metric_svg(table, "iou"));
    }
}

}  // namespace sgmil::milcli
