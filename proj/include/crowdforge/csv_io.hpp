#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "crowdforge/data.hpp"

namespace crowdforge {

namespace csv {

// All files are plain numeric CSV: UTF-8, LF line endings, one header row.

inline std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string current;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(current);
            current.clear();
        } else if (c != '\r') {
            current += c;
        }
    }
    fields.push_back(current);
    return fields;
}

inline double parse_double(const std::string& field, const std::string& file, std::size_t line) {
    double value = 0.0;
    const char* begin = field.data();
    const char* end = begin + field.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end)
        throw ParseError(file + " line " + std::to_string(line) + ": bad number '" + field + "'");
    return value;
}

inline std::size_t parse_index(const std::string& field, const std::string& file,
                               std::size_t line) {
    std::size_t value = 0;
    const char* begin = field.data();
    const char* end = begin + field.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end)
        throw ParseError(file + " line " + std::to_string(line) + ": bad index '" + field + "'");
    return value;
}

struct Reader {
    explicit Reader(const std::filesystem::path& path) : name(path.filename().string()) {
        stream.open(path);
        if (!stream) throw ValidationError("cannot open " + path.string());
    }

    bool next(std::vector<std::string>& fields) {
        std::string raw;
        if (!std::getline(stream, raw)) return false;
        ++line;
        fields = split_line(raw);
        return true;
    }

    void expect_header(const std::string& expected) {
        std::string raw;
        if (!std::getline(stream, raw)) throw ParseError(name + ": missing header");
        ++line;
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        if (raw != expected)
            throw ParseError(name + " line 1: expected header '" + expected + "'");
    }

    std::string name;
    std::ifstream stream;
    std::size_t line = 0;
};

struct Writer {
    explicit Writer(const std::filesystem::path& path) {
        stream.open(path, std::ios::binary); // LF endings on every platform
        if (!stream) throw ValidationError("cannot write " + path.string());
    }
    std::ofstream stream;
};

} // namespace csv

inline void write_features_csv(const std::filesystem::path& path, const Dataset& data) {
    csv::Writer out(path);
    out.stream << "sample_id";
    for (std::size_t j = 0; j < data.feature_dim; ++j) out.stream << ",f" << j;
    out.stream << "\n";
    for (std::size_t n = 0; n < data.size(); ++n) {
        out.stream << n;
        for (double v : data.features[n]) out.stream << "," << csv::format_number(v);
        out.stream << "\n";
    }
}

// Features only; task/class metadata comes from the caller (config or artifact).
inline Dataset read_features_csv(const std::filesystem::path& path, TaskKind task,
                                 std::size_t num_classes) {
    csv::Reader in(path);
    std::string raw;
    if (!std::getline(in.stream, raw)) throw ParseError(in.name + ": missing header");
    in.line = 1;
    const auto header = csv::split_line(raw);
    if (header.empty() || header[0] != "sample_id")
        throw ParseError(in.name + " line 1: expected 'sample_id,f0,...' header");
    const std::size_t d = header.size() - 1;

    Dataset data;
    data.task = task;
    data.num_classes = num_classes;
    data.feature_dim = d;
    std::vector<std::string> fields;
    while (in.next(fields)) {
        if (fields.size() == 1 && fields[0].empty()) continue; // trailing newline
        if (fields.size() != d + 1)
            throw ParseError(in.name + " line " + std::to_string(in.line) + ": expected " +
                             std::to_string(d + 1) + " fields");
        const std::size_t id = csv::parse_index(fields[0], in.name, in.line);
        if (id != data.features.size())
            throw ValidationError(in.name + " line " + std::to_string(in.line) +
                                  ": sample ids must be consecutive from 0");
        std::vector<double> x(d);
        for (std::size_t j = 0; j < d; ++j)
            x[j] = csv::parse_double(fields[j + 1], in.name, in.line);
        data.features.push_back(std::move(x));
    }
    return data;
}

inline void write_ground_truth_csv(const std::filesystem::path& path, const Dataset& data) {
    if (!data.has_ground_truth())
        throw ContractError("write_ground_truth_csv: dataset has no ground truth");
    csv::Writer out(path);
    out.stream << "sample_id,label\n";
    for (std::size_t n = 0; n < data.size(); ++n)
        out.stream << n << "," << csv::format_number(data.ground_truth[n]) << "\n";
}

inline void read_ground_truth_csv(const std::filesystem::path& path, Dataset& data) {
    csv::Reader in(path);
    in.expect_header("sample_id,label");
    data.ground_truth.assign(data.size(), 0.0);
    std::vector<bool> seen(data.size(), false);
    std::vector<std::string> fields;
    while (in.next(fields)) {
        if (fields.size() == 1 && fields[0].empty()) continue;
        if (fields.size() != 2)
            throw ParseError(in.name + " line " + std::to_string(in.line) + ": expected 2 fields");
        const std::size_t id = csv::parse_index(fields[0], in.name, in.line);
        if (id >= data.size())
            throw ValidationError(in.name + " line " + std::to_string(in.line) +
                                  ": sample id out of range");
        if (seen[id])
            throw ValidationError(in.name + " line " + std::to_string(in.line) +
                                  ": duplicate sample id " + std::to_string(id));
        seen[id] = true;
        data.ground_truth[id] = csv::parse_double(fields[1], in.name, in.line);
    }
    for (std::size_t n = 0; n < data.size(); ++n)
        if (!seen[n])
            throw ValidationError(in.name + ": missing ground truth for sample " +
                                  std::to_string(n));
    data.validate();
}

inline void write_annotations_csv(const std::filesystem::path& path,
                                  const AnnotationSet& annotations) {
    csv::Writer out(path);
    out.stream << "sample_id,worker_id,label\n";
    for (const Annotation& a : annotations.triples())
        out.stream << a.sample << "," << a.worker << "," << csv::format_number(a.label) << "\n";
}

// Rows become a validated AnnotationSet. Counts default to max id + 1 when the
// caller does not fix them; `num_classes` 0 skips the class-range check.
inline AnnotationSet load_annotations(const std::filesystem::path& path,
                                      std::size_t num_classes = 0,
                                      std::optional<std::size_t> n_samples = std::nullopt,
                                      std::optional<std::size_t> n_workers = std::nullopt) {
    csv::Reader in(path);
    in.expect_header("sample_id,worker_id,label");
    std::vector<Annotation> triples;
    std::size_t max_sample = 0, max_worker = 0;
    std::vector<std::string> fields;
    while (in.next(fields)) {
        if (fields.size() == 1 && fields[0].empty()) continue;
        if (fields.size() != 3)
            throw ParseError(in.name + " line " + std::to_string(in.line) + ": expected 3 fields");
        Annotation a;
        a.sample = csv::parse_index(fields[0], in.name, in.line);
        a.worker = csv::parse_index(fields[1], in.name, in.line);
        a.label = csv::parse_double(fields[2], in.name, in.line);
        max_sample = std::max(max_sample, a.sample + 1);
        max_worker = std::max(max_worker, a.worker + 1);
        triples.push_back(a);
    }
    return AnnotationSet(n_samples.value_or(max_sample), n_workers.value_or(max_worker),
                         num_classes, std::move(triples));
}

inline const char* split_part_name(std::size_t part) {
    switch (part) {
    case 0: return "train";
    case 1: return "valid";
    case 2: return "test";
    }
    throw ContractError("split part out of range");
}

inline void write_split_csv(const std::filesystem::path& path, const DataSplit& parts,
                            std::size_t n_samples) {
    std::vector<std::string> assignment(n_samples);
    for (std::size_t id : parts.train_ids) assignment[id] = "train";
    for (std::size_t id : parts.valid_ids) assignment[id] = "valid";
    for (std::size_t id : parts.test_ids) assignment[id] = "test";
    csv::Writer out(path);
    out.stream << "sample_id,part\n";
    for (std::size_t n = 0; n < n_samples; ++n)
        out.stream << n << "," << assignment[n] << "\n";
}

// part name per sample id
inline std::vector<std::string> read_split_csv(const std::filesystem::path& path,
                                               std::size_t n_samples) {
    csv::Reader in(path);
    in.expect_header("sample_id,part");
    std::vector<std::string> parts(n_samples);
    std::vector<std::string> fields;
    while (in.next(fields)) {
        if (fields.size() == 1 && fields[0].empty()) continue;
        if (fields.size() != 2)
            throw ParseError(in.name + " line " + std::to_string(in.line) + ": expected 2 fields");
        const std::size_t id = csv::parse_index(fields[0], in.name, in.line);
        if (id >= n_samples)
            throw ValidationError(in.name + ": sample id out of range");
        if (fields[1] != "train" && fields[1] != "valid" && fields[1] != "test")
            throw ValidationError(in.name + " line " + std::to_string(in.line) +
                                  ": unknown part '" + fields[1] + "'");
        parts[id] = fields[1];
    }
    for (std::size_t n = 0; n < n_samples; ++n)
        if (parts[n].empty())
            throw ValidationError(in.name + ": missing part for sample " + std::to_string(n));
    return parts;
}

inline nlohmann::json worker_profile_to_json(const WorkerProfile& w) {
    nlohmann::json j;
    if (w.kind == WorkerProfile::Kind::kConfusion) {
        j["kind"] = "confusion";
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t r = 0; r < w.num_classes; ++r) {
            nlohmann::json row = nlohmann::json::array();
            for (std::size_t c = 0; c < w.num_classes; ++c)
                row.push_back(w.confusion[r * w.num_classes + c]);
            rows.push_back(std::move(row));
        }
        j["confusion"] = std::move(rows);
    } else {
        j["kind"] = "affine_noise";
        j["scale"] = w.scale;
        j["bias"] = w.bias;
        j["noise_std"] = w.noise_std;
    }
    j["p_label"] = w.p_label;
    return j;
}

inline WorkerProfile worker_profile_from_json(const nlohmann::json& j) {
    WorkerProfile w;
    const std::string kind = j.at("kind").get<std::string>();
    w.p_label = j.value("p_label", 1.0);
    if (kind == "confusion") {
        w.kind = WorkerProfile::Kind::kConfusion;
        const auto& rows = j.at("confusion");
        w.num_classes = rows.size();
        for (const auto& row : rows) {
            if (row.size() != w.num_classes)
                throw ValidationError("worker profile: confusion matrix must be square");
            for (const auto& v : row) w.confusion.push_back(v.get<double>());
        }
    } else if (kind == "affine_noise") {
        w.kind = WorkerProfile::Kind::kAffineNoise;
        w.scale = j.value("scale", 1.0);
        w.bias = j.value("bias", 0.0);
        w.noise_std = j.value("noise_std", 0.0);
    } else {
        throw ValidationError("worker profile: unknown kind '" + kind + "'");
    }
    w.validate();
    return w;
}

inline std::vector<WorkerProfile> load_worker_profiles(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.filename().string() + ": " + e.what());
    }
    if (!j.is_array()) throw ValidationError("worker profiles: expected a JSON array");
    std::vector<WorkerProfile> out;
    for (const auto& item : j) out.push_back(worker_profile_from_json(item));
    return out;
}

inline void write_worker_profiles(const std::filesystem::path& path,
                                  const std::vector<WorkerProfile>& profiles) {
    nlohmann::json j = nlohmann::json::array();
    for (const WorkerProfile& w : profiles) j.push_back(worker_profile_to_json(w));
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

} // namespace crowdforge
