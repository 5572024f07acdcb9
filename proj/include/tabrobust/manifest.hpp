#pragma once

#include <json.hpp>

#include "tabrobust/attack.hpp"
#include "tabrobust/harden.hpp"
#include "tabrobust/metrics.hpp"

namespace tabrobust {

extern const char* kVersion;

/// Effective run configuration: embedded per-command defaults, overlaid by a
/// JSON config file and then by --set key=value overrides. Any key that does
/// not exist in the defaults is rejected by name.
class RunConfig {
public:
    static RunConfig defaults(const std::string& command);

    const std::string& command() const { return command_; }
    const nlohmann::ordered_json& doc() const { return doc_; }

    void merge_file(const std::string& path);
    void merge(const nlohmann::json& overlay); // validates keys, recursively
    void set_override(const std::string& key_eq_value);

    std::string dump() const { return doc_.dump(2) + "\n"; }

    // dotted-path getters
    const nlohmann::ordered_json& at(const std::string& path) const;
    double num(const std::string& path) const { return at(path).get<double>(); }
    int integer(const std::string& path) const { return at(path).get<int>(); }
    bool flag(const std::string& path) const { return at(path).get<bool>(); }
    std::string str(const std::string& path) const { return at(path).get<std::string>(); }
    std::uint64_t seed(const std::string& path) const { return at(path).get<std::uint64_t>(); }

    AttackBudget budget(const std::string& path) const;

private:
    std::string command_;
    nlohmann::ordered_json doc_;
};

/// Run manifest: config snapshot plus fingerprints of everything the run
/// touched. The manifest id hashes the canonical content without the
/// timestamp, so reruns of the same configuration share an id.
class RunManifest {
public:
    explicit RunManifest(const RunConfig& cfg);

    void set(const std::string& key, nlohmann::ordered_json value);
    void add_output(const std::string& filename);
    void fingerprint_file(const std::string& label, const std::string& path);

    std::string id() const;   // 16 hex chars
    void write(const std::string& dir) const; // <dir>/manifest.json

private:
    nlohmann::ordered_json doc_;
};

std::uint64_t file_fingerprint(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

} // namespace tabrobust
