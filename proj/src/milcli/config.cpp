#include "sgmil/milcli/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "sgmil/errors.hpp"

namespace sgmil::milcli {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double parse_real(std::string_view key, std::string_view v) {
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size())
        throw ConfigError("config key '" + std::string(key) + "': '" + std::string(v) + "' is not a number");
    return out;
}

std::uint64_t parse_uint(std::string_view key, std::string_view v) {
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size())
        throw ConfigError("config key '" + std::string(key) + "': '" + std::string(v) + "' is not a non-negative integer");
    return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config key '" + std::string(key) + "': '" + std::string(v) + "' is not a boolean");
}

std::string format_uint(std::uint64_t v) { return std::to_string(v); }
std::string format_bool(bool v) { return v ? "true" : "false"; }

struct Field {
    std::function<void(ExperimentConfig&, std::string_view key, std::string_view value)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

#define REAL_FIELD(path, member)                                                                     \
    {path, Field{[](ExperimentConfig& c, std::string_view k, std::string_view v) { c.member = parse_real(k, v); }, \
                 [](const ExperimentConfig& c) { return format_real(c.member); }}}
#define UINT_FIELD(path, member)                                                                     \
    {path, Field{[](ExperimentConfig& c, std::string_view k, std::string_view v) {                   \
                     c.member = static_cast<decltype(c.member)>(parse_uint(k, v));                   \
                 },                                                                                  \
                 [](const ExperimentConfig& c) { return format_uint(c.member); }}}
#define BOOL_FIELD(path, member)                                                                     \
    {path, Field{[](ExperimentConfig& c, std::string_view k, std::string_view v) { c.member = parse_bool(k, v); }, \
                 [](const ExperimentConfig& c) { return format_bool(c.member); }}}

const std::map<std::string, Field, std::less<>>& fields() {
    static const std::map<std::string, Field, std::less<>> table{
        {"recipe.corpus", Field{[](ExperimentConfig& c, std::string_view, std::string_view v) {
                                    c.recipe.corpus = bagdata::parse_corpus_kind(v);
                                },
                                [](const ExperimentConfig& c) { return std::string(to_string(c.recipe.corpus)); }}},
        {"recipe.positive_class", Field{[](ExperimentConfig& c, std::string_view k, std::string_view v) {
                                            c.recipe.positive_class = static_cast<int>(parse_uint(k, v));
                                        },
                                        [](const ExperimentConfig& c) { return std::to_string(c.recipe.positive_class); }}},
        REAL_FIELD("recipe.mean_bag_size", recipe.mean_bag_size),
        REAL_FIELD("recipe.bag_size_std", recipe.bag_size_std),
        {"recipe.positive_mode", Field{[](ExperimentConfig& c, std::string_view, std::string_view v) {
                                           c.recipe.mode = bagdata::parse_positive_mode(v);
                                       },
                                       [](const ExperimentConfig& c) { return std::string(to_string(c.recipe.mode)); }}},
        UINT_FIELD("recipe.positives_per_bag", recipe.positives_per_bag),
        BOOL_FIELD("recipe.balanced", recipe.balanced),
        UINT_FIELD("recipe.image_side", recipe.image_side),
        UINT_FIELD("recipe.train_bags", train_bags),
        UINT_FIELD("recipe.test_bags", test_bags),
        {"recipe.data_dir", Field{[](ExperimentConfig& c, std::string_view, std::string_view v) { c.data_dir = v; },
                                  [](const ExperimentConfig& c) { return c.data_dir; }}},
        UINT_FIELD("recipe.classes", classes),
        UINT_FIELD("recipe.grid_height", grid_height),
        UINT_FIELD("recipe.grid_width", grid_width),
        UINT_FIELD("recipe.grid_features", grid_features),
        {"backbone", Field{[](ExperimentConfig& c, std::string_view, std::string_view v) { c.backbone = v; },
                           [](const ExperimentConfig& c) { return c.backbone; }}},
        {"pooling.kind", Field{[](ExperimentConfig& c, std::string_view, std::string_view v) {
                                   c.pooling.kind = pooling::parse_pool_kind(v);
                               },
                               [](const ExperimentConfig& c) { return std::string(to_string(c.pooling.kind)); }}},
        REAL_FIELD("pooling.r", pooling.r),
        {"loss.kind", Field{[](ExperimentConfig& c, std::string_view, std::string_view v) {
                                c.loss = sgloss::parse_loss_kind(v);
                            },
                            [](const ExperimentConfig& c) { return std::string(to_string(c.loss)); }}},
        REAL_FIELD("loss.delta_l", sgl.delta_l),
        REAL_FIELD("loss.lambda", sgl.lambda),
        REAL_FIELD("loss.mu", sgl.mu),
        REAL_FIELD("loss.eps_clamp", sgl.eps_clamp),
        {"optimizer.kind", Field{[](ExperimentConfig& c, std::string_view, std::string_view v) {
                                     if (v == "adam") c.optimizer.kind = diffnet::OptimizerKind::adam;
                                     else if (v == "sgd") c.optimizer.kind = diffnet::OptimizerKind::sgd;
                                     else throw ConfigError("unknown optimizer '" + std::string(v) + "'");
                                 },
                                 [](const ExperimentConfig& c) {
                                     return std::string(c.optimizer.kind == diffnet::OptimizerKind::adam ? "adam" : "sgd");
                                 }}},
        REAL_FIELD("optimizer.lr", optimizer.lr),
        REAL_FIELD("optimizer.weight_decay", optimizer.weight_decay),
        REAL_FIELD("optimizer.beta1", optimizer.beta1),
        REAL_FIELD("optimizer.beta2", optimizer.beta2),
        REAL_FIELD("optimizer.eps", optimizer.eps),
        UINT_FIELD("epochs", epochs),
        {"seeds", Field{[](ExperimentConfig& c, std::string_view k, std::string_view v) {
                            c.seeds.clear();
                            std::size_t start = 0;
                            while (start <= v.size()) {
                                const auto comma = v.find(',', start);
                                const auto item = trim(v.substr(start, comma == std::string_view::npos ? v.npos : comma - start));
                                if (!item.empty()) c.seeds.push_back(parse_uint(k, item));
                                if (comma == std::string_view::npos) break;
                                start = comma + 1;
                            }
                        },
                        [](const ExperimentConfig& c) {
                            std::string out;
                            for (std::size_t i = 0; i < c.seeds.size(); ++i) out += (i ? "," : "") + std::to_string(c.seeds[i]);
                            return out;
                        }}},
        REAL_FIELD("eval.t_p", localization.t_p),
        REAL_FIELD("eval.t_iou", localization.t_iou),
        REAL_FIELD("eval.class_threshold", localization.class_threshold),
        UINT_FIELD("eval.upsample", localization.upsample),
        BOOL_FIELD("eval.morphology", localization.morphology),
        {"output.dir", Field{[](ExperimentConfig& c, std::string_view, std::string_view v) { c.output_dir = v; },
                             [](const ExperimentConfig& c) { return c.output_dir; }}},
        BOOL_FIELD("output.wall_clock", wall_clock),
    };
    return table;
}

#undef REAL_FIELD
#undef UINT_FIELD
#undef BOOL_FIELD

}  // namespace

std::string format_real(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) throw UsageError("cannot format real");
    return std::string(buf, ptr);
}

void ExperimentConfig::validate() const {
    recipe.validate();
    pooling.validate();
    sgl.validate();
    optimizer.validate();
    localization.validate();
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (seeds.empty()) throw ConfigError("seed list is empty");
    if (train_bags == 0 || test_bags == 0) throw ConfigError("train and test bag counts must be positive");
    if (backbone != "lenet5-mil" && backbone != "mlp") throw ConfigError("unknown backbone '" + backbone + "'");
    if (classes == 0) throw ConfigError("at least one class is required");
    if (recipe.corpus != bagdata::CorpusKind::synthetic_grid && classes != 1)
        throw ConfigError("image corpora produce single-class bags; set recipe.classes = 1");
}

std::map<std::string, std::string> parse_key_values(std::string_view text) {
    std::map<std::string, std::string> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        const std::string key(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
        if (!out.emplace(key, value).second)
            throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    return out;
}

void set_field(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
    const auto& table = fields();
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
    it->second.set(cfg, key, value);
}

ExperimentConfig make_config(const std::map<std::string, std::string>& entries) {
    ExperimentConfig cfg;
    for (const auto& [k, v] : entries) set_field(cfg, k, v);
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return make_config(parse_key_values(ss.str()));
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& [k, f] : fields()) keys.push_back(k);
    return keys;
}

std::map<std::string, std::string> canonical_entries(const ExperimentConfig& cfg) {
    std::map<std::string, std::string> out;
    for (const auto& [k, f] : fields()) out.emplace(k, f.get(cfg));
    return out;
}

std::string config_hash(const ExperimentConfig& cfg) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [k, v] : canonical_entries(cfg)) {
        if (k.starts_with("output.")) continue;
        for (char ch : k + "=" + v + "\n") {
            h ^= static_cast<unsigned char>(ch);
            h *= 0x100000001b3ULL;
        }
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace sgmil::milcli
