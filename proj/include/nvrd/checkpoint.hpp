#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "nvrd/errors.hpp"
#include "nvrd/tensor.hpp"

namespace nvrd {

// A named bundle of tensors plus free-form metadata, stored as one blob file
// per tensor under a directory with a meta.json index. Tensors are stored in
// the standard 32-bit blob format, so reloading a checkpoint rounds values
// to float precision; pipelines that need bit-stable behavior must reload
// from disk everywhere rather than mixing in-memory and reloaded weights.
struct Checkpoint {
    nlohmann::json meta;
    std::vector<std::pair<std::string, Tensor>> tensors;
};

namespace detail {

inline void validate_tensor_name(const std::string& name) {
    require_io(!name.empty() && name.size() < 128, "checkpoint: bad tensor name length");
    for (char c : name) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                  c == '_';
        require_io(ok, "checkpoint: tensor names must be [A-Za-z0-9_]");
    }
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ck) {
    std::filesystem::create_directories(dir);
    nlohmann::json names = nlohmann::json::array();
    for (const auto& [name, tensor] : ck.tensors) {
        detail::validate_tensor_name(name);
        write_blob(dir / (name + ".nvrd"), tensor);
        names.push_back(name);
    }
    nlohmann::json index;
    index["meta"] = ck.meta;
    index["tensors"] = names;
    write_text_file(dir / "meta.json", index.dump(2) + "\n");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& dir) {
    std::ifstream in(dir / "meta.json");
    require_io(in.good(), "checkpoint: cannot open " + (dir / "meta.json").string());
    nlohmann::json index = nlohmann::json::parse(in);
    Checkpoint ck;
    ck.meta = index.at("meta");
    for (const auto& j : index.at("tensors")) {
        std::string name = j.get<std::string>();
        detail::validate_tensor_name(name);
        ck.tensors.emplace_back(name, read_blob(dir / (name + ".nvrd")));
    }
    return ck;
}

}  // namespace nvrd
