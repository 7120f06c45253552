#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mindgym/errors.hpp"

namespace mindgym {

inline constexpr const char* kToolVersion = "0.1.0";

// Every output file starts with a manifest line carrying the config hash,
// root seed and tool version, so re-running with the same header inputs
// reproduces the body bytes under mock backends.
struct Manifest {
    nlohmann::json payload;

    static Manifest make(std::uint64_t seed, const nlohmann::json& config_snapshot) {
        Manifest m;
        m.payload = {{"tool_version", kToolVersion},
                     {"rng_seed", seed},
                     {"config_hash", std::hash<std::string>{}(config_snapshot.dump())},
                     {"config", config_snapshot}};
        return m;
    }

    std::string line() const { return nlohmann::json{{"_manifest", payload}}.dump(); }

    static bool is_manifest_line(const nlohmann::json& j) {
        return j.is_object() && j.contains("_manifest");
    }
};

// Writes lines to a temp file then renames, so failures never leave a
// partial output at the destination.
class AtomicJsonlWriter {
public:
    explicit AtomicJsonlWriter(std::filesystem::path dest)
        : dest_(std::move(dest)), tmp_(dest_.string() + ".tmp") {
        out_.open(tmp_, std::ios::binary | std::ios::trunc);
        if (!out_) throw ConfigError("cannot open for writing: " + tmp_.string());
    }

    ~AtomicJsonlWriter() {
        if (!committed_) {
            out_.close();
            std::error_code ec;
            std::filesystem::remove(tmp_, ec);
        }
    }

    void write_line(const std::string& line) { out_ << line << '\n'; }
    void write_json(const nlohmann::json& j) { write_line(j.dump()); }

    void commit() {
        out_.close();
        std::filesystem::rename(tmp_, dest_);
        committed_ = true;
    }

private:
    std::filesystem::path dest_;
    std::filesystem::path tmp_;
    std::ofstream out_;
    bool committed_ = false;
};

struct JsonlFile {
    std::optional<nlohmann::json> manifest;
    std::vector<nlohmann::json> records;
    std::vector<std::size_t> line_numbers;  // 1-based, parallel to records
};

inline JsonlFile read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open: " + path.string());
    JsonlFile f;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
        }
        if (lineno == 1 && Manifest::is_manifest_line(j)) {
            f.manifest = j.at("_manifest");
            continue;
        }
        f.records.push_back(std::move(j));
        f.line_numbers.push_back(lineno);
    }
    return f;
}

}  // namespace mindgym
