// SPDX-License-Identifier: Apache-2.0
#pragma once

// Checkpoint container. Layout, all integers little-endian:
//
//   "CDTCKPT1"  u32 section-count
//   per section: u32 name-length, name bytes, u64 payload-length, payload
//
// Sections: "config" (JSON), "index" and "vocab" (newline-separated),
// "table" and "params" (matrices), optionally "cluster" (matrix, then the
// newline-separated labels as a string). A matrix is u64 rows, u64 cols and
// rows*cols f64 values in column-major order; a string is u64 length + bytes.

#include <bit>
#include <cstring>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cdt/common/error.hpp"
#include "cdt/common/files.hpp"
#include "cdt/common/strings.hpp"
#include "cdt/model/knn.hpp"
#include "cdt/model/train.hpp"

namespace cdt::model {

namespace ckpt {

static_assert(std::endian::native == std::endian::little, "little-endian host assumed");

inline constexpr std::string_view kMagic = "CDTCKPT1";

template <typename T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T>
T get(std::string_view& in) {
    if (in.size() < sizeof(T)) throw ParseError("truncated checkpoint");
    T v;
    std::memcpy(&v, in.data(), sizeof(T));
    in.remove_prefix(sizeof(T));
    return v;
}

inline void put_string(std::string& out, std::string_view s) {
    put<std::uint64_t>(out, s.size());
    out.append(s);
}

inline std::string get_string(std::string_view& in) {
    const auto n = get<std::uint64_t>(in);
    if (in.size() < n) throw ParseError("truncated checkpoint string");
    std::string s(in.substr(0, n));
    in.remove_prefix(n);
    return s;
}

inline void put_matrix(std::string& out, const Mat& m) {
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    out.append(reinterpret_cast<const char*>(m.data()), static_cast<std::size_t>(m.size()) * sizeof(double));
}

inline Mat get_matrix(std::string_view& in) {
    const auto r = get<std::uint64_t>(in);
    const auto c = get<std::uint64_t>(in);
    const std::size_t bytes = r * c * sizeof(double);
    if (in.size() < bytes) throw ParseError("truncated checkpoint matrix");
    Mat m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    std::memcpy(m.data(), in.data(), bytes);
    in.remove_prefix(bytes);
    return m;
}

inline std::string join_lines(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += x + "\n";
    return s;
}

inline std::vector<std::string> split_lines(const std::string& s) {
    std::vector<std::string> out;
    std::size_t b = 0;
    while (b < s.size()) {
        const auto e = s.find('\n', b);
        out.push_back(s.substr(b, e - b));
        b = e + 1;
    }
    return out;
}

}  // namespace ckpt

inline std::string serialize(const TypeModel& m, const TypeCluster* cluster = nullptr) {
    std::map<std::string, std::string> sections;
    nlohmann::json cfg = m.cfg;
    sections["config"] = cfg.dump();
    sections["index"] = ckpt::join_lines(m.index.types());
    sections["vocab"] = ckpt::join_lines(m.table->tokens);
    ckpt::put_matrix(sections["table"], m.table->vectors);
    std::string& params = sections["params"];
    for (const auto* t : m.params.tensors()) ckpt::put_matrix(params, *t);
    if (cluster) {
        std::string& c = sections["cluster"];
        ckpt::put<std::uint64_t>(c, cluster->k);
        ckpt::put_matrix(c, cluster->features);
        ckpt::put_string(c, ckpt::join_lines(cluster->labels));
    }
    std::string out(ckpt::kMagic);
    ckpt::put<std::uint32_t>(out, static_cast<std::uint32_t>(sections.size()));
    for (const auto& [name, payload] : sections) {
        ckpt::put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        ckpt::put<std::uint64_t>(out, payload.size());
        out += payload;
    }
    return out;
}

struct Checkpoint {
    TypeModel model;
    std::optional<TypeCluster> cluster;
};

inline Checkpoint deserialize(std::string_view in) {
    if (in.substr(0, ckpt::kMagic.size()) != ckpt::kMagic) throw ParseError("not a model checkpoint");
    in.remove_prefix(ckpt::kMagic.size());
    std::map<std::string, std::string> sections;
    const auto n = ckpt::get<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < n; ++i) {
        const auto len = ckpt::get<std::uint32_t>(in);
        if (in.size() < len) throw ParseError("truncated checkpoint section name");
        std::string name(in.substr(0, len));
        in.remove_prefix(len);
        const auto plen = ckpt::get<std::uint64_t>(in);
        if (in.size() < plen) throw ParseError("truncated checkpoint section " + name);
        sections[name] = std::string(in.substr(0, plen));
        in.remove_prefix(plen);
    }
    if (!in.empty()) throw ParseError("trailing bytes after checkpoint");
    for (const char* req : {"config", "index", "vocab", "table", "params"})
        if (!sections.count(req)) throw ParseError(std::string("checkpoint lacks section ") + req);

    Checkpoint c;
    c.model.cfg = nlohmann::json::parse(sections["config"]).get<ModelConfig>();
    c.model.index = VisibleTypeIndex(ckpt::split_lines(sections["index"]));
    auto table = std::make_shared<EmbeddingTable>();
    table->tokens = ckpt::split_lines(sections["vocab"]);
    std::string_view tv(sections["table"]);
    table->vectors = ckpt::get_matrix(tv);
    if (static_cast<std::size_t>(table->vectors.cols()) != table->tokens.size())
        throw ParseError("checkpoint vocab and table disagree");
    for (std::size_t r = 0; r < table->tokens.size(); ++r) table->rows[table->tokens[r]] = static_cast<std::int32_t>(r);
    c.model.table = std::move(table);
    std::string_view pv(sections["params"]);
    for (auto* t : c.model.params.tensors()) *t = ckpt::get_matrix(pv);
    if (!pv.empty()) throw ParseError("trailing bytes in checkpoint params");
    if (auto it = sections.find("cluster"); it != sections.end()) {
        std::string_view cv(it->second);
        TypeCluster cl;
        cl.k = ckpt::get<std::uint64_t>(cv);
        cl.features = ckpt::get_matrix(cv);
        cl.labels = ckpt::split_lines(ckpt::get_string(cv));
        if (static_cast<std::size_t>(cl.features.cols()) != cl.labels.size())
            throw ParseError("checkpoint cluster rows and labels disagree");
        c.cluster = std::move(cl);
    }
    return c;
}

inline void save_checkpoint(const std::filesystem::path& p, const TypeModel& m, const TypeCluster* cluster = nullptr) {
    write_file(p, serialize(m, cluster));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& p) { return deserialize(read_file(p)); }

}  // namespace cdt::model
