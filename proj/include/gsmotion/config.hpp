#pragma once

#include "gsmotion/optimizer.hpp"
#include "gsmotion/synthetic.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace gsmotion {

/// Flat `key = value` configuration, one entry per line, `#` starts a
/// comment. `kernel` may repeat; every other key may appear once.
///
///   width = 121
///   height = 121
///   position_units = normalized        # or pixels
///   kernel = 0, 0, 4.8, 4.8, 0, 1.0    # x, y, sigma_x, sigma_y, rho, c
///   motion = -0.01, -0.01              # u, v in pixels
///   seed = 7
class KeyValueConfig {
public:
    struct Entry {
        std::string key;
        std::string value;
        int line = 0;
    };

    static KeyValueConfig parse(std::istream& is);
    static KeyValueConfig parse_string(const std::string& text);
    static KeyValueConfig load(const std::filesystem::path& path);

    bool has(const std::string& key) const;
    std::optional<std::string> get(const std::string& key) const;
    std::vector<std::string> all(const std::string& key) const;
    const std::vector<Entry>& entries() const noexcept { return entries_; }

    /// Raw file text; hashed into report provenance.
    const std::string& text() const noexcept { return text_; }

private:
    std::vector<Entry> entries_;
    std::string text_;
};

double parse_double(const std::string& key, const std::string& value);
long long parse_integer(const std::string& key, const std::string& value);
std::vector<double> parse_list(const std::string& key, const std::string& value);

/// Throws ConfigError naming the first key that no reader understands.
void check_known_keys(const KeyValueConfig& cfg);

SceneSpec scene_from_config(const KeyValueConfig& cfg);

/// Applied motion from the `motion` key, if present.
std::optional<Point> motion_from_config(const KeyValueConfig& cfg);

/// Starts from `base` and overrides every key present.
OptimConfig optim_from_config(const KeyValueConfig& cfg, OptimConfig base = {});

/// Text of the reference scene in this format.
std::string reference_scene_config();

/// 64-bit FNV-1a, used for config provenance.
std::uint64_t fnv1a64(const std::string& bytes) noexcept;

}  // namespace gsmotion
