#include "healthwatch/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <boost/crc.hpp>

#include "healthwatch/error.hpp"

namespace healthwatch {

namespace {

constexpr char kMagic[4] = {'H', 'W', 'F', 'M'};

class Writer {
public:
    void bytes(const void* data, std::size_t n) { out_.append(static_cast<const char*>(data), n); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f64(double v) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
    }
    void layer(const nn::DenseLayer& l) {
        u32(static_cast<std::uint32_t>(l.inputs));
        u32(static_cast<std::uint32_t>(l.outputs));
        for (double w : l.weight) f64(w);
        for (double b : l.bias) f64(b);
    }
    std::string& str() { return out_; }

private:
    std::string out_;
};

class Reader {
public:
    explicit Reader(std::string_view data) : data_(data) {}

    void need(std::size_t n) const {
        if (pos_ + n > data_.size()) throw ModelFormatError("weight file is truncated");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_++])) << (8 * i);
        return v;
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    double f64() {
        need(8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_++])) << (8 * i);
        return std::bit_cast<double>(bits);
    }
    nn::DenseLayer layer() {
        const std::uint32_t in = u32();
        const std::uint32_t out = u32();
        if (in == 0 || out == 0 || in > 4096 || out > 4096) throw ModelFormatError("implausible layer shape");
        nn::DenseLayer l(in, out);
        need((static_cast<std::size_t>(in) * out + out) * 8);
        for (double& w : l.weight) w = f64();
        for (double& b : l.bias) b = f64();
        return l;
    }
    std::size_t position() const { return pos_; }

private:
    std::string_view data_;
    std::size_t pos_ = 0;
};

std::uint32_t crc32(std::string_view bytes) {
    boost::crc_32_type crc;
    crc.process_bytes(bytes.data(), bytes.size());
    return crc.checksum();
}

} // namespace

std::string serialize_models(std::span<const ForecastModel> models) {
    Writer w;
    w.bytes(kMagic, sizeof kMagic);
    w.u32(kModelFormatVersion);
    w.u32(static_cast<std::uint32_t>(models.size()));
    for (const auto& m : models) {
        m.validate();
        w.i32(m.hyper.horizon);
        w.i32(m.hyper.recent_omit);
        w.f64(m.hyper.tau_lower);
        w.f64(m.hyper.tau_upper);
        w.f64(m.hyper.quantile_weight);
        w.f64(m.hyper.anomaly_threshold);
        w.f64(m.regression.irregularity_weight);
        w.f64(m.regression.irregularity_bias);
        for (const auto& l : m.regression.trunk) w.layer(l);
        for (const auto& head : m.regression.heads)
            for (const auto& l : head) w.layer(l);
        for (const auto& l : m.classifier.layers) w.layer(l);
    }
    w.u32(crc32(w.str()));
    return std::move(w.str());
}

std::vector<ForecastModel> deserialize_models(std::string_view bytes) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
        throw ModelFormatError("not a weight file (bad magic or too short)");
    Reader r(bytes.substr(4));
    const std::uint32_t version = r.u32();
    if (version != kModelFormatVersion) {
        throw ModelFormatError("unsupported weight file version " + std::to_string(version) + " (expected " +
                               std::to_string(kModelFormatVersion) + ")");
    }
    const std::uint32_t count = r.u32();
    if (count == 0 || count > 16) throw ModelFormatError("implausible model count");
    std::vector<ForecastModel> models;
    for (std::uint32_t k = 0; k < count; ++k) {
        ForecastModel m;
        m.hyper.horizon = r.i32();
        m.hyper.recent_omit = r.i32();
        m.hyper.tau_lower = r.f64();
        m.hyper.tau_upper = r.f64();
        m.hyper.quantile_weight = r.f64();
        m.hyper.anomaly_threshold = r.f64();
        m.regression.irregularity_weight = r.f64();
        m.regression.irregularity_bias = r.f64();
        for (auto& l : m.regression.trunk) l = r.layer();
        for (auto& head : m.regression.heads)
            for (auto& l : head) l = r.layer();
        for (auto& l : m.classifier.layers) l = r.layer();
        m.validate();
        models.push_back(std::move(m));
    }
    const std::size_t payload_end = 4 + r.position();
    const std::uint32_t stored = r.u32();
    if (4 + r.position() != bytes.size()) throw ModelFormatError("trailing bytes after weight payload");
    if (stored != crc32(bytes.substr(0, payload_end))) throw ModelFormatError("weight file checksum mismatch");
    return models;
}

void save_models(const std::filesystem::path& path, std::span<const ForecastModel> models) {
    const std::string bytes = serialize_models(models);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write weight file " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing weight file " + path.string());
}

std::vector<ForecastModel> load_models(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read weight file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize_models(buf.str());
}

void save_model(const std::filesystem::path& path, const ForecastModel& model) {
    save_models(path, std::span<const ForecastModel>(&model, 1));
}

ForecastModel load_model(const std::filesystem::path& path) {
    auto models = load_models(path);
    if (models.size() != 1) throw ModelFormatError("expected a single model, found " + std::to_string(models.size()));
    return std::move(models.front());
}

} // namespace healthwatch
