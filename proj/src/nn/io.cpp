#include "rfcloak/nn/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include "rfcloak/error.hpp"
#include "rfcloak/serialization.hpp"

namespace rfcloak::nn {

namespace {

class Writer {
public:
    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out.insert(out.end(), b, b + n);
    }
    void u8(std::uint8_t v) { out.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

    std::vector<std::uint8_t> out;
};

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& bytes) : in_(bytes) {}

    const std::uint8_t* take(std::size_t n) {
        if (n > in_.size() - pos_) throw FormatError("file is truncated");
        const auto* p = in_.data() + pos_;
        pos_ += n;
        return p;
    }
    std::uint8_t u8() { return *take(1); }
    std::uint32_t u32() {
        const auto* p = take(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t{p[i]} << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        const auto* p = take(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t{p[i]} << (8 * i);
        return v;
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    bool done() const { return pos_ == in_.size(); }

private:
    const std::vector<std::uint8_t>& in_;
    std::size_t pos_ = 0;
};

void write_preamble(Writer& w, const char (&magic)[5], std::uint32_t version, const json& header) {
    w.raw(magic, 4);
    w.u32(version);
    const std::string text = header.dump();
    w.u64(text.size());
    w.raw(text.data(), text.size());
}

json read_preamble(Reader& r, const char (&magic)[5], std::uint32_t version, const char* what) {
    if (std::memcmp(r.take(4), magic, 4) != 0) throw FormatError(std::string(what) + ": bad magic");
    const auto v = r.u32();
    if (v != version) {
        throw FormatError(std::string(what) + ": unsupported version " + std::to_string(v));
    }
    const auto len = r.u64();
    const auto* p = r.take(static_cast<std::size_t>(len));
    try {
        return json::parse(std::string(reinterpret_cast<const char*>(p), static_cast<std::size_t>(len)));
    } catch (const json::exception& e) {
        throw FormatError(std::string(what) + ": corrupt header: " + e.what());
    }
}

}  // namespace

std::vector<std::uint8_t> encode_dataset(const Dataset& data) {
    data.validate();
    json header{{"format", "rfcloak-dataset"},
                {"n_samples", data.size()},
                {"shape", {2, data.n_pilot_symbols, data.pilots_per_symbol}},
                {"n_classes", data.n_classes},
                {"n_conditions", data.n_conditions},
                {"test_fraction", data.test_fraction}};
    Writer w;
    write_preamble(w, "RFDS", kDatasetVersion, header);
    for (double v : data.values) w.f64(v);
    for (int v : data.labels) w.i32(v);
    for (int v : data.condition_ids) w.i32(v);
    for (auto v : data.sample_ids) w.u64(v);
    for (auto v : data.split) w.u8(static_cast<std::uint8_t>(v));
    return std::move(w.out);
}

Dataset decode_dataset(const std::vector<std::uint8_t>& bytes) {
    Reader r(bytes);
    const json h = read_preamble(r, "RFDS", kDatasetVersion, "dataset");
    Dataset d;
    std::size_t n = 0;
    try {
        const auto shape = h.at("shape").get<std::vector<int>>();
        if (shape.size() != 3 || shape[0] != 2) throw FormatError("dataset: shape must be [2, symbols, pilots]");
        d.n_pilot_symbols = shape[1];
        d.pilots_per_symbol = shape[2];
        d.n_classes = h.at("n_classes").get<int>();
        d.n_conditions = h.at("n_conditions").get<int>();
        d.test_fraction = h.at("test_fraction").get<double>();
        n = h.at("n_samples").get<std::size_t>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("dataset: header: ") + e.what());
    }
    if (d.n_pilot_symbols < 1 || d.pilots_per_symbol < 1) throw FormatError("dataset: empty sample shape");
    const std::size_t per_sample = 8 * d.sample_size() + 4 + 4 + 8 + 1;
    if (n > bytes.size() / per_sample) throw FormatError("dataset: sample count exceeds file size");

    d.values.resize(n * d.sample_size());
    for (auto& v : d.values) v = r.f64();
    d.labels.resize(n);
    for (auto& v : d.labels) v = r.i32();
    d.condition_ids.resize(n);
    for (auto& v : d.condition_ids) v = r.i32();
    d.sample_ids.resize(n);
    for (auto& v : d.sample_ids) v = r.u64();
    d.split.resize(n);
    for (auto& v : d.split) {
        const auto s = r.u8();
        if (s > 1) throw FormatError("dataset: invalid split flag");
        v = static_cast<Split>(s);
    }
    if (!r.done()) throw FormatError("dataset: trailing bytes");
    try {
        d.validate();
    } catch (const Error& e) {
        throw FormatError(std::string("dataset: ") + e.what());
    }
    return d;
}

std::vector<std::uint8_t> encode_model(const ClassifierModel& model) {
    json header{{"format", "rfcloak-checkpoint"},
                {"architecture", model.arch},
                {"train_meta", model.meta},
                {"parameter_count", model.parameter_count()}};
    Writer w;
    write_preamble(w, "RFCK", kCheckpointVersion, header);
    for (const Tensor* t : model.parameters()) {
        for (double v : t->data) w.f64(v);
    }
    return std::move(w.out);
}

ClassifierModel decode_model(const std::vector<std::uint8_t>& bytes) {
    Reader r(bytes);
    const json h = read_preamble(r, "RFCK", kCheckpointVersion, "checkpoint");
    Architecture arch;
    TrainMeta meta;
    std::size_t count = 0;
    try {
        arch = h.at("architecture").get<Architecture>();
        meta = h.at("train_meta").get<TrainMeta>();
        count = h.at("parameter_count").get<std::size_t>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("checkpoint: header: ") + e.what());
    } catch (const ConfigError& e) {
        throw FormatError(std::string("checkpoint: header: ") + e.what());
    }
    ClassifierModel model;
    try {
        model = ClassifierModel::create(arch, 0);
    } catch (const Error& e) {
        throw FormatError(std::string("checkpoint: architecture: ") + e.what());
    }
    if (model.parameter_count() != count) throw FormatError("checkpoint: parameter count mismatch");
    for (Tensor* t : model.parameters()) {
        for (auto& v : t->data) v = r.f64();
    }
    if (!r.done()) throw FormatError("checkpoint: trailing bytes");
    model.meta = std::move(meta);
    return model;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed for " + path.string());
}

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
    write_file(path, encode_dataset(data));
}

Dataset load_dataset(const std::filesystem::path& path) { return decode_dataset(read_file(path)); }

void save_model(const std::filesystem::path& path, const ClassifierModel& model) {
    write_file(path, encode_model(model));
}

ClassifierModel load_model(const std::filesystem::path& path) { return decode_model(read_file(path)); }

}  // namespace rfcloak::nn
