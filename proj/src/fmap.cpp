#include "aog/fmap.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "aog/error.hpp"

namespace aog {

namespace {

constexpr char kMagic[4] = {'F', 'M', 'A', 'P'};
constexpr std::uint32_t kVersion = 1;

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    void need(std::size_t n, const char* what) const {
        if (bytes_.size() - pos_ < n)
            throw Error(ErrorCode::TruncatedPayload, std::string("stream ends inside ") + what);
    }

    std::uint16_t u16(const char* what) {
        need(2, what);
        std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }

    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | bytes_[pos_ + i];
        pos_ += 4;
        return v;
    }

    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

    std::string str(const char* what) {
        std::size_t len = u16(what);
        need(len, what);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), len);
        pos_ += len;
        return s;
    }

    void magic() {
        if (bytes_.size() < 4 || std::memcmp(bytes_.data(), kMagic, 4) != 0)
            throw Error(ErrorCode::BadMagic, "stream does not start with \"FMAP\"");
        pos_ = 4;
    }

    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

class Writer {
public:
    void u16(std::uint16_t v) {
        out_.push_back(static_cast<std::uint8_t>(v & 0xff));
        out_.push_back(static_cast<std::uint8_t>(v >> 8));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void str(const std::string& s) {
        if (s.size() > std::numeric_limits<std::uint16_t>::max())
            throw Error(ErrorCode::InvalidLayout, "string longer than 65535 bytes");
        u16(static_cast<std::uint16_t>(s.size()));
        out_.insert(out_.end(), s.begin(), s.end());
    }
    void raw(const char* p, std::size_t n) { out_.insert(out_.end(), p, p + n); }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

std::uint16_t narrow_u16(int v, const char* what) {
    if (v < 0 || v > std::numeric_limits<std::uint16_t>::max())
        throw Error(ErrorCode::InvalidLayout, std::string(what) + " does not fit in u16");
    return static_cast<std::uint16_t>(v);
}

void check_same_layout(const FeatureMapSet& ref, const FeatureMapSet& other) {
    if (ref.layers.size() != other.layers.size())
        throw Error(ErrorCode::InvalidLayout, "image " + other.image_id + " has a different layer count");
    for (std::size_t l = 0; l < ref.layers.size(); ++l) {
        const auto& a = ref.layers[l].meta;
        const auto& b = other.layers[l].meta;
        if (a.channels != b.channels || a.height != b.height || a.width != b.width)
            throw Error(ErrorCode::InvalidLayout,
                        "image " + other.image_id + " layer " + std::to_string(l) + " has different dims");
    }
}

}  // namespace

void validate(const LayerMeta& meta) {
    if (meta.channels < 1 || meta.height < 1 || meta.width < 1)
        throw Error(ErrorCode::InvalidLayout, "layer " + meta.name + " has a zero dimension");
    if (meta.height != meta.width)
        throw Error(ErrorCode::InvalidLayout, "layer " + meta.name + " is not square");
    if (!(meta.stride_px > 0.0f) || !(meta.rf_px > 0.0f))
        throw Error(ErrorCode::InvalidLayout, "layer " + meta.name + " has non-positive stride or rf");
}

UnitRegion unit_to_image_region(const LayerMeta& meta, int row, int col) {
    if (row < 0 || row >= meta.height || col < 0 || col >= meta.width)
        throw Error(ErrorCode::IndexOutOfRange,
                    "cell (" + std::to_string(row) + ", " + std::to_string(col) + ") outside layer " + meta.name);
    const double offset = meta.offset_px;
    const double stride = meta.stride_px;
    return {{offset + stride * col, offset + stride * row}, static_cast<double>(meta.rf_px)};
}

bool FeatureMapSet::is_normalized() const {
    return !layers.empty() && std::all_of(layers.begin(), layers.end(), [](const LayerMaps& l) {
        return l.normalized.size() == l.raw.size();
    });
}

FeatureMapSet read_fmap(std::span<const std::uint8_t> bytes) {
    Reader in(bytes);
    in.magic();
    if (std::uint32_t version = in.u32("version"); version != kVersion)
        throw Error(ErrorCode::BadVersion, "unsupported FMAP version " + std::to_string(version));

    FeatureMapSet maps;
    maps.image_id = in.str("image id");
    maps.image_width = in.u32("image width");
    maps.image_height = in.u32("image height");
    if (maps.image_width == 0 || maps.image_height == 0)
        throw Error(ErrorCode::InvalidLayout, "image size must be positive");

    const std::size_t layer_count = in.u16("layer count");
    maps.layers.reserve(layer_count);
    for (std::size_t l = 0; l < layer_count; ++l) {
        LayerMaps layer;
        layer.meta.name = in.str("layer name");
        layer.meta.channels = in.u16("channels");
        layer.meta.height = in.u16("height");
        layer.meta.width = in.u16("width");
        layer.meta.stride_px = in.f32("stride");
        layer.meta.offset_px = in.f32("offset");
        layer.meta.rf_px = in.f32("rf");
        validate(layer.meta);
        const std::size_t n = layer.meta.value_count();
        if (in.remaining() / 4 < n)
            throw Error(ErrorCode::TruncatedPayload, "layer " + layer.meta.name + " declares " +
                                                         std::to_string(n) + " values past end of stream");
        layer.raw.resize(n);
        for (auto& v : layer.raw) v = in.f32("activations");
        maps.layers.push_back(std::move(layer));
    }
    if (in.remaining() != 0)
        throw Error(ErrorCode::CorruptPayload, std::to_string(in.remaining()) + " trailing bytes");
    return maps;
}

std::vector<std::uint8_t> write_fmap(const FeatureMapSet& maps) {
    Writer out;
    out.raw(kMagic, 4);
    out.u32(kVersion);
    out.str(maps.image_id);
    out.u32(maps.image_width);
    out.u32(maps.image_height);
    out.u16(narrow_u16(static_cast<int>(maps.layers.size()), "layer count"));
    for (const auto& layer : maps.layers) {
        validate(layer.meta);
        if (layer.raw.size() != layer.meta.value_count())
            throw Error(ErrorCode::InvalidLayout, "layer " + layer.meta.name + " grid size mismatch");
        out.str(layer.meta.name);
        out.u16(narrow_u16(layer.meta.channels, "channels"));
        out.u16(narrow_u16(layer.meta.height, "height"));
        out.u16(narrow_u16(layer.meta.width, "width"));
        out.f32(layer.meta.stride_px);
        out.f32(layer.meta.offset_px);
        out.f32(layer.meta.rf_px);
        for (float v : layer.raw) out.f32(v);
    }
    return out.take();
}

FeatureMapSet load_fmap_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return read_fmap(bytes);
}

void save_fmap_file(const std::filesystem::path& path, const FeatureMapSet& maps) {
    const auto bytes = write_fmap(maps);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<FeatureMapSet> load_fmap_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::Io, dir.string() + " is not a directory");
    std::vector<FeatureMapSet> out;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".fmap")
            out.push_back(load_fmap_file(entry.path()));
    }
    std::sort(out.begin(), out.end(),
              [](const FeatureMapSet& a, const FeatureMapSet& b) { return a.image_id < b.image_id; });
    return out;
}

CorpusStats compute_corpus_stats(std::span<const FeatureMapSet> maps, NormStatistic statistic) {
    if (maps.empty()) throw Error(ErrorCode::EmptyCorpus, "normalization needs at least one image");
    const FeatureMapSet& ref = maps.front();
    for (const auto& m : maps) check_same_layout(ref, m);

    CorpusStats stats;
    stats.statistic = statistic;
    stats.channel_level.resize(ref.layers.size());
    for (std::size_t l = 0; l < ref.layers.size(); ++l) {
        const LayerMeta& meta = ref.layers[l].meta;
        const std::size_t cells = meta.cell_count();
        auto& levels = stats.channel_level[l];
        levels.assign(meta.channels, 0.0);
        for (int c = 0; c < meta.channels; ++c) {
            double sum = 0.0;
            std::size_t count = 0;
            std::vector<double> positives;
            for (const auto& m : maps) {
                const float* grid = m.layers[l].raw.data() + static_cast<std::size_t>(c) * cells;
                for (std::size_t i = 0; i < cells; ++i) {
                    const double a = grid[i];
                    switch (statistic) {
                        case NormStatistic::MeanPositive:
                            if (a > 0.0) {
                                sum += a;
                                ++count;
                            }
                            break;
                        case NormStatistic::MeanRelu:
                            sum += std::max(a, 0.0);
                            ++count;
                            break;
                        case NormStatistic::MedianPositive:
                            if (a > 0.0) positives.push_back(a);
                            break;
                    }
                }
            }
            if (statistic == NormStatistic::MedianPositive) {
                if (!positives.empty()) {
                    std::sort(positives.begin(), positives.end());
                    const std::size_t n = positives.size();
                    levels[c] = n % 2 ? positives[n / 2] : 0.5 * (positives[n / 2 - 1] + positives[n / 2]);
                }
            } else if (count > 0) {
                levels[c] = sum / static_cast<double>(count);
            }
        }
    }
    return stats;
}

void apply_normalization(FeatureMapSet& maps, const CorpusStats& stats) {
    if (stats.channel_level.size() != maps.layers.size())
        throw Error(ErrorCode::InvalidLayout, "corpus stats do not match layer count of " + maps.image_id);
    for (std::size_t l = 0; l < maps.layers.size(); ++l) {
        LayerMaps& layer = maps.layers[l];
        const auto& levels = stats.channel_level[l];
        if (static_cast<int>(levels.size()) != layer.meta.channels)
            throw Error(ErrorCode::InvalidLayout, "corpus stats do not match channels of " + layer.meta.name);
        const std::size_t cells = layer.meta.cell_count();
        layer.normalized.resize(layer.raw.size());
        for (int c = 0; c < layer.meta.channels; ++c) {
            const double level = levels[c];
            for (std::size_t i = 0; i < cells; ++i) {
                const std::size_t k = static_cast<std::size_t>(c) * cells + i;
                const double a = std::max(static_cast<double>(layer.raw[k]), 0.0);
                layer.normalized[k] = level > 0.0 ? a / level : 0.0;
            }
        }
    }
}

std::pair<std::vector<FeatureMapSet>, CorpusStats> normalize_activations(std::vector<FeatureMapSet> maps,
                                                                         NormStatistic statistic) {
    CorpusStats stats = compute_corpus_stats(maps, statistic);
    for (auto& m : maps) apply_normalization(m, stats);
    return {std::move(maps), std::move(stats)};
}

FeatureMapSet mirror_horizontal(const FeatureMapSet& maps) {
    FeatureMapSet out = maps;
    for (auto& layer : out.layers) {
        const int w = layer.meta.width;
        const std::size_t rows = static_cast<std::size_t>(layer.meta.channels) * layer.meta.height;
        for (std::size_t r = 0; r < rows; ++r) {
            std::reverse(layer.raw.begin() + r * w, layer.raw.begin() + (r + 1) * w);
            if (!layer.normalized.empty())
                std::reverse(layer.normalized.begin() + r * w, layer.normalized.begin() + (r + 1) * w);
        }
    }
    return out;
}

}  // namespace aog
