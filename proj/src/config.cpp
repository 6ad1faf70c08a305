#include "gsmotion/config.hpp"

#include "gsmotion/errors.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string_view>

namespace gsmotion {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

constexpr std::array kSceneKeys = {"width", "height", "position_units", "kernel", "motion"};
constexpr std::array kOptimKeys = {
    "seed",
    "initial_kernel_count",
    "prune_threshold",
    "sigma_min",
    "sigma_max",
    "stage2_target_l1",
    "stage2_max_iterations",
    "stage2_lr_position",
    "stage2_lr_shape",
    "stage2_lr_color",
    "stage2_final_lr_scale",
    "lambda1",
    "lambda2",
    "lambda3",
    "smooth_eps",
    "l1_mode",
    "freeze_kernels",
    "stage3_max_iterations",
    "stage3_lr_position",
    "stage3_lr_shape",
    "stage3_lr_color",
    "stage3_lr_motion",
    "stage3_lr_deviation",
    "stage3_final_lr_scale",
    "plateau_window",
    "plateau_rel_tol",
    "adam_beta1",
    "adam_beta2",
    "adam_eps",
};
constexpr std::array kReportKeys = {"arrow_scale"};

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key, "expected a boolean, got '" + v + "'");
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::istream& is) {
    std::stringstream buf;
    buf << is.rdbuf();
    return parse_string(buf.str());
}

KeyValueConfig KeyValueConfig::parse_string(const std::string& text) {
    KeyValueConfig out;
    out.text_ = text;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        const std::string body = trim(std::string_view(line).substr(0, hash));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("", "line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        Entry e{trim(std::string_view(body).substr(0, eq)), trim(std::string_view(body).substr(eq + 1)), lineno};
        if (e.key.empty()) throw ConfigError("", "line " + std::to_string(lineno) + ": empty key");
        if (e.value.empty()) throw ConfigError(e.key, "line " + std::to_string(lineno) + ": empty value");
        if (e.key != "kernel" && out.has(e.key)) {
            throw ConfigError(e.key, "line " + std::to_string(lineno) + ": duplicate key");
        }
        out.entries_.push_back(std::move(e));
    }
    return out;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config '" + path.string() + "'");
    return parse(is);
}

bool KeyValueConfig::has(const std::string& key) const {
    return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.key == key; });
}

std::optional<std::string> KeyValueConfig::get(const std::string& key) const {
    for (const auto& e : entries_) {
        if (e.key == key) return e.value;
    }
    return std::nullopt;
}

std::vector<std::string> KeyValueConfig::all(const std::string& key) const {
    std::vector<std::string> out;
    for (const auto& e : entries_) {
        if (e.key == key) out.push_back(e.value);
    }
    return out;
}

double parse_double(const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
        throw ConfigError(key, "expected a number, got '" + value + "'");
    }
    return out;
}

long long parse_integer(const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    long long out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
        throw ConfigError(key, "expected an integer, got '" + value + "'");
    }
    return out;
}

std::vector<double> parse_list(const std::string& key, const std::string& value) {
    std::vector<double> out;
    std::string_view rest(value);
    while (true) {
        const auto comma = rest.find(',');
        out.push_back(parse_double(key, std::string(rest.substr(0, comma))));
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
    }
    return out;
}

void check_known_keys(const KeyValueConfig& cfg) {
    auto known = [](const std::string& k) {
        auto in = [&](const auto& arr) { return std::find(arr.begin(), arr.end(), k) != arr.end(); };
        return in(kSceneKeys) || in(kOptimKeys) || in(kReportKeys);
    };
    for (const auto& e : cfg.entries()) {
        if (!known(e.key)) throw ConfigError(e.key, "line " + std::to_string(e.line) + ": unknown key");
    }
}

SceneSpec scene_from_config(const KeyValueConfig& cfg) {
    check_known_keys(cfg);
    SceneSpec spec;
    auto dim = [&](const char* key) {
        const auto v = cfg.get(key);
        if (!v) throw ConfigError(key, "missing");
        const auto n = parse_integer(key, *v);
        if (n <= 0 || n > 1 << 15) throw ConfigError(key, "must be a positive pixel count");
        return static_cast<int>(n);
    };
    spec.width = dim("width");
    spec.height = dim("height");

    const std::string units = cfg.get("position_units").value_or("pixels");
    if (units != "pixels" && units != "normalized") {
        throw ConfigError("position_units", "expected 'pixels' or 'normalized', got '" + units + "'");
    }
    for (const auto& v : cfg.all("kernel")) {
        const auto f = parse_list("kernel", v);
        if (f.size() != 6) throw ConfigError("kernel", "expected 6 values (x, y, sigma_x, sigma_y, rho, c)");
        Kernel2D k;
        k.mu = {f[0], f[1]};
        if (units == "normalized") k.mu = normalized_to_pixel(k.mu, spec.width, spec.height);
        k.sigma_x = f[2];
        k.sigma_y = f[3];
        k.rho = f[4];
        k.c = f[5];
        try {
            validate(k);
        } catch (const ParameterDomainError& e) {
            throw ConfigError("kernel", e.what());
        }
        spec.kernels.push_back(k);
    }
    if (spec.kernels.empty()) throw ConfigError("kernel", "at least one kernel is required");
    spec.applied_motion = motion_from_config(cfg).value_or(Point{});
    return spec;
}

std::optional<Point> motion_from_config(const KeyValueConfig& cfg) {
    const auto v = cfg.get("motion");
    if (!v) return std::nullopt;
    const auto f = parse_list("motion", *v);
    if (f.size() != 2) throw ConfigError("motion", "expected 2 values (u, v)");
    if (!std::isfinite(f[0]) || !std::isfinite(f[1])) throw ConfigError("motion", "must be finite");
    return Point{f[0], f[1]};
}

OptimConfig optim_from_config(const KeyValueConfig& cfg, OptimConfig out) {
    check_known_keys(cfg);
    auto num = [&](const char* key, double& field) {
        if (auto v = cfg.get(key)) field = parse_double(key, *v);
    };
    auto integer = [&](const char* key, int& field) {
        if (auto v = cfg.get(key)) {
            const auto n = parse_integer(key, *v);
            if (n < 0 || n > 100'000'000) throw ConfigError(key, "out of range");
            field = static_cast<int>(n);
        }
    };
    if (auto v = cfg.get("seed")) {
        const auto n = parse_integer("seed", *v);
        if (n < 0) throw ConfigError("seed", "must be >= 0");
        out.seed = static_cast<std::uint64_t>(n);
    }
    integer("initial_kernel_count", out.initial_kernel_count);
    num("prune_threshold", out.prune_threshold);
    num("sigma_min", out.sigma_min);
    num("sigma_max", out.sigma_max);
    num("stage2_target_l1", out.stage2_target_l1);
    integer("stage2_max_iterations", out.stage2_max_iterations);
    num("stage2_lr_position", out.stage2_steps.position);
    num("stage2_lr_shape", out.stage2_steps.shape);
    num("stage2_lr_color", out.stage2_steps.color);
    num("stage2_final_lr_scale", out.stage2_final_lr_scale);
    num("lambda1", out.lambda1);
    num("lambda2", out.lambda2);
    num("lambda3", out.lambda3);
    num("smooth_eps", out.smooth_eps);
    if (auto v = cfg.get("l1_mode")) {
        if (*v == "mean") out.l1_mode = L1Mode::Mean;
        else if (*v == "frame1") out.l1_mode = L1Mode::Frame1;
        else if (*v == "frame2") out.l1_mode = L1Mode::Frame2;
        else throw ConfigError("l1_mode", "expected mean, frame1 or frame2, got '" + *v + "'");
    }
    if (auto v = cfg.get("freeze_kernels")) out.freeze_kernels = parse_bool("freeze_kernels", *v);
    integer("stage3_max_iterations", out.stage3_max_iterations);
    num("stage3_lr_position", out.stage3_steps.position);
    num("stage3_lr_shape", out.stage3_steps.shape);
    num("stage3_lr_color", out.stage3_steps.color);
    num("stage3_lr_motion", out.stage3_steps.motion);
    num("stage3_lr_deviation", out.stage3_steps.deviation);
    num("stage3_final_lr_scale", out.stage3_final_lr_scale);
    integer("plateau_window", out.plateau_window);
    num("plateau_rel_tol", out.plateau_rel_tol);
    num("adam_beta1", out.beta1);
    num("adam_beta2", out.beta2);
    num("adam_eps", out.adam_eps);
    validate(out);
    return out;
}

std::string reference_scene_config() {
    return "# Single bright patch, 16-bit, moved 0.01 px left and 0.01 px up in frame 2.\n"
           "width = 121\n"
           "height = 121\n"
           "position_units = normalized\n"
           "# x, y, sigma_x, sigma_y, rho, c\n"
           "kernel = 0, 0, 4.8, 4.8, 0, 1.0\n"
           "motion = -0.01, -0.01\n";
}

std::uint64_t fnv1a64(const std::string& bytes) noexcept {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace gsmotion
