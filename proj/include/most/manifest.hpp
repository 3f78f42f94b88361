#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace most {

std::string sha1_hex(const void* data, size_t len);
std::string sha1_hex(const std::string& s);

/// Hash of a file's contents framed the way git hashes blobs:
/// sha1("blob <len>\0" + bytes).
std::string git_blob_hash_file(const std::string& path);

/// Flat key=value configuration text. '#' starts a comment, blank lines are
/// skipped, later keys win. Keys are dotted (e.g. "train.epochs").
std::map<std::string, std::string> parse_config_file(const std::string& path);
std::map<std::string, std::string> parse_config_text(const std::string& text);

/// Snapshot of one command invocation. Re-running a command from its
/// manifest reproduces the artifacts byte for byte, so the manifest holds
/// everything the run depends on and nothing wall-clock dependent.
struct RunManifest {
    std::string command;
    uint64_t seed = 0;
    std::map<std::string, std::string> config;  // effective values, flattened
    std::map<std::string, std::string> inputs;  // path -> git-style content hash
    std::vector<std::string> outputs;

    void write(const std::string& path) const;
    static RunManifest read(const std::string& path);
};

}  // namespace most
