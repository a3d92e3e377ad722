// SPDX-License-Identifier: Apache-2.0
#pragma once

// Extraction over a snapshot directory whose immediate subdirectories are
// projects, and the line-delimited dataset file (one ModuleRecord per line,
// ordered by file path).

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cdt/common/files.hpp"
#include "cdt/common/strings.hpp"
#include "cdt/extract/extractor.hpp"
#include "cdt/extract/split.hpp"

namespace cdt::extract {

struct SkippedFile {
    std::string file_path;
    std::string reason;
};

struct ExtractResult {
    std::vector<ModuleRecord> records;
    std::vector<SkippedFile> skipped;
};

/// Project directories directly under `root`, sorted.
inline std::vector<std::string> list_projects(const std::filesystem::path& root) {
    std::vector<std::string> out;
    for (const auto& e : std::filesystem::directory_iterator(root))
        if (e.is_directory() && e.path().filename().string().front() != '.')
            out.push_back(e.path().filename().string());
    std::sort(out.begin(), out.end());
    return out;
}

/// Source files of a project, as paths relative to the snapshot root, sorted.
inline std::vector<std::string> list_sources(const std::filesystem::path& root, const std::string& project) {
    std::vector<std::string> out;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root / project)) {
        if (!e.is_regular_file() || e.path().extension() != ".py") continue;
        const auto rel = std::filesystem::relative(e.path(), root).generic_string();
        if (rel.find("/.") != std::string::npos) continue;
        out.push_back(rel);
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// The project id of a dataset-relative file path (its first component).
inline std::string project_of(std::string_view file_path) {
    return std::string(file_path.substr(0, file_path.find('/')));
}

/// Dotted module path of a file: `proj/pkg/mod.py` -> `proj.pkg.mod`.
inline std::string module_path(std::string_view file_path) {
    std::string p(file_path);
    if (p.ends_with(".py")) p.resize(p.size() - 3);
    if (p.ends_with("/__init__")) p.resize(p.size() - 9);
    std::replace(p.begin(), p.end(), '/', '.');
    return p;
}

inline void set_origin(ModuleRecord& rec, const std::string& project) {
    // Snapshot directories are named <owner>__<repo>__<hash12>.
    const auto first = project.find("__");
    const auto last = project.rfind("__");
    if (first != std::string::npos && last != first) {
        rec.author = project.substr(0, first);
        rec.repository = project.substr(first + 2, last - first - 2);
    } else {
        rec.author.clear();
        rec.repository = project;
    }
}

inline ExtractResult extract_snapshot(const std::filesystem::path& root, const SplitAssignment& splits,
                                      const ExtractOptions& opts = {}) {
    ExtractResult out;
    for (const auto& project : list_projects(root)) {
        const Split s = splits.of(project);
        for (const auto& rel : list_sources(root, project)) {
            const auto text = read_file(root / rel);
            try {
                ModuleRecord rec = extract_module(rel, text, opts);
                set_origin(rec, project);
                rec.set = s;
                out.records.push_back(std::move(rec));
            } catch (const SyntaxError& e) {
                out.skipped.push_back({rel, e.what()});
            }
        }
    }
    std::sort(out.records.begin(), out.records.end(),
              [](const ModuleRecord& a, const ModuleRecord& b) { return a.file_path < b.file_path; });
    return out;
}

inline std::string format_dataset(const std::vector<ModuleRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        out += to_json(r).dump();
        out += '\n';
    }
    return out;
}

inline void write_dataset(const std::vector<ModuleRecord>& records, const std::filesystem::path& path) {
    write_file(path, format_dataset(records));
}

inline std::vector<ModuleRecord> read_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open dataset " + path.string());
    std::vector<ModuleRecord> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (trim(line).empty()) continue;
        try {
            out.push_back(module_from_json(nlohmann::ordered_json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("dataset record: ") + e.what(), n);
        }
    }
    return out;
}

}  // namespace cdt::extract
