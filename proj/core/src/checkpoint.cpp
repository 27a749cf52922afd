#include "pecan/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

namespace pecan {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'P', 'E', 'C', 'A', 'N', 'C', 'K', '\0'};

json layer_to_json(const LayerSpec& l) {
    json j{{"name", l.name}, {"kind", std::string(to_string(l.kind))}};
    if (l.parameterized()) {
        j["c_in"] = l.c_in;
        j["c_out"] = l.c_out;
        j["k"] = l.k;
        j["stride"] = l.stride;
        j["padding"] = l.padding;
        j["method"] = std::string(to_string(l.method));
        if (l.pecan()) {
            j["p"] = l.p;
            j["D"] = l.groups;
            j["d"] = l.dim;
            j["tau"] = l.tau;
        }
    } else if (l.kind == LayerKind::maxpool) {
        j["k"] = l.k;
        j["stride"] = l.stride;
    }
    return j;
}

LayerSpec layer_from_json(const json& j) {
    LayerSpec l;
    l.name = j.at("name").get<std::string>();
    const auto kind = parse_layer_kind(j.at("kind").get<std::string>());
    if (!kind) throw FormatError("manifest: unknown layer kind in '" + l.name + "'");
    l.kind = *kind;
    if (l.parameterized()) {
        l.c_in = j.at("c_in").get<std::size_t>();
        l.c_out = j.at("c_out").get<std::size_t>();
        l.k = j.at("k").get<std::size_t>();
        l.stride = j.at("stride").get<std::size_t>();
        l.padding = j.at("padding").get<std::size_t>();
        const auto method = parse_method(j.at("method").get<std::string>());
        if (!method) throw FormatError("manifest: unknown method in '" + l.name + "'");
        l.method = *method;
        if (l.pecan()) {
            l.p = j.at("p").get<std::size_t>();
            l.groups = j.at("D").get<std::size_t>();
            l.dim = j.at("d").get<std::size_t>();
            l.tau = j.at("tau").get<double>();
        }
    } else if (l.kind == LayerKind::maxpool) {
        l.k = j.at("k").get<std::size_t>();
        l.stride = j.at("stride").get<std::size_t>();
    }
    return l;
}

json manifest(const Checkpoint& ck) {
    json layers = json::array();
    for (const LayerSpec& l : ck.spec.layers) layers.push_back(layer_to_json(l));
    return json{{"format_version", ck.version},
                {"seed", ck.seed},
                {"epoch", ck.epoch},
                {"calibrated", ck.calibrated},
                {"network",
                 {{"arch", ck.spec.arch},
                  {"input", {ck.spec.in_channels, ck.spec.in_height, ck.spec.in_width}},
                  {"layers", layers}}}};
}

class Writer {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* c = static_cast<const unsigned char*>(p);
        out.insert(out.end(), c, c + n);
    }
    template <class U>
    void le(U v) {
        for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    std::vector<unsigned char> out;
};

class Reader {
public:
    explicit Reader(const std::vector<unsigned char>& b) : buf(b) {}
    void need(std::size_t n, const char* what) const {
        if (n > buf.size() - pos) {
            throw FormatError(std::string("truncated checkpoint: ") + what + " needs " + std::to_string(n) +
                              " bytes at offset " + std::to_string(pos) + ", " + std::to_string(buf.size() - pos) +
                              " remain");
        }
    }
    template <class U>
    U le(const char* what) {
        need(sizeof(U), what);
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[pos + i]) << (8 * i);
        pos += sizeof(U);
        return v;
    }
    std::string str(std::size_t n, const char* what) {
        need(n, what);
        std::string s(buf.begin() + static_cast<std::ptrdiff_t>(pos), buf.begin() + static_cast<std::ptrdiff_t>(pos + n));
        pos += n;
        return s;
    }
    const std::vector<unsigned char>& buf;
    std::size_t pos = 0;
};

void check_blob_shape(const Blob* b, const std::string& name, const Shape& expected) {
    if (!b) throw FormatError("checkpoint lacks blob '" + name + "'");
    if (b->shape != expected) {
        throw FormatError("blob '" + name + "' has shape " + to_string(b->shape) + ", manifest implies " +
                          to_string(expected));
    }
}

// Every blob must name a parameterized layer of the manifest and agree with its shape.
void validate_blobs(const Checkpoint& ck) {
    for (const Blob& b : ck.blobs) {
        const auto dot = b.name.find('.');
        const LayerSpec* l = dot == std::string::npos ? nullptr : ck.spec.find(b.name.substr(0, dot));
        if (!l || !l->parameterized()) throw FormatError("blob '" + b.name + "' does not belong to any layer");
        const std::string field = b.name.substr(dot + 1);
        if (field == "weight") {
            check_blob_shape(&b, b.name, Shape{l->c_out, l->fan_in()});
            continue;
        }
        if (field == "bias") {
            check_blob_shape(&b, b.name, Shape{l->c_out});
            continue;
        }
        const bool codebook = field.rfind("codebook.", 0) == 0, lut = field.rfind("lut.", 0) == 0;
        if (!l->pecan() || (!codebook && !lut)) throw FormatError("blob '" + b.name + "' is not expected");
        const std::string index = field.substr(field.find('.') + 1);
        if (index.empty() || index.find_first_not_of("0123456789") != std::string::npos ||
            std::stoull(index) >= l->groups) {
            throw FormatError("blob '" + b.name + "' names a group outside 0.." + std::to_string(l->groups - 1));
        }
        const std::size_t rows = codebook ? l->dim : l->c_out;
        if (b.shape.size() != 2 || b.shape[0] != rows || b.shape[1] > l->p) {
            throw FormatError("blob '" + b.name + "' has shape " + to_string(b.shape) + ", expected [" +
                              std::to_string(rows) + ", <= " + std::to_string(l->p) + "]");
        }
    }
}

} // namespace

const Blob* Checkpoint::find(const std::string& name) const noexcept {
    for (const Blob& b : blobs)
        if (b.name == name) return &b;
    return nullptr;
}

Blob to_blob(std::string name, const Tensor& t) {
    Blob b{std::move(name), t.shape(), {}};
    b.data.reserve(t.size());
    for (double v : t.data()) b.data.push_back(static_cast<float>(v));
    return b;
}

Tensor from_blob(const Blob& b) {
    return Tensor(b.shape, std::vector<double>(b.data.begin(), b.data.end()));
}

std::vector<Blob> lut_blobs(const Model& model) {
    std::vector<Blob> out;
    const InferenceEngine engine(model);
    for (std::size_t i = 0; i < model.spec.layers.size(); ++i) {
        const LookupTable* lut = engine.lut(i);
        if (!lut) continue;
        for (std::size_t j = 0; j < lut->groups(); ++j)
            out.push_back(to_blob(model.spec.layers[i].name + ".lut." + std::to_string(j), lut->group(j)));
    }
    return out;
}

Checkpoint to_checkpoint(const Model& model, bool include_luts) {
    model.validate();
    Checkpoint ck;
    ck.spec = model.spec;
    ck.seed = model.seed;
    ck.epoch = model.epoch;
    ck.calibrated = model.calibrated;
    for (std::size_t i = 0; i < model.spec.layers.size(); ++i) {
        const LayerSpec& l = model.spec.layers[i];
        if (!l.parameterized()) continue;
        const LayerParams& p = model.params[i];
        ck.blobs.push_back(to_blob(l.name + ".weight", p.weight));
        ck.blobs.push_back(to_blob(l.name + ".bias", p.bias));
        if (l.pecan()) {
            for (std::size_t j = 0; j < p.codebook.groups(); ++j)
                ck.blobs.push_back(to_blob(l.name + ".codebook." + std::to_string(j), p.codebook.group(j)));
        }
    }
    if (include_luts) {
        for (Blob& b : lut_blobs(model)) ck.blobs.push_back(std::move(b));
    }
    return ck;
}

Model to_model(const Checkpoint& ck) {
    validate_blobs(ck);
    Model m;
    m.spec = ck.spec;
    m.spec.resolve();
    m.seed = ck.seed;
    m.epoch = ck.epoch;
    m.calibrated = ck.calibrated;
    for (const LayerSpec& l : m.spec.layers) {
        LayerParams p;
        if (l.parameterized()) {
            const std::string w = l.name + ".weight", b = l.name + ".bias";
            check_blob_shape(ck.find(w), w, Shape{l.c_out, l.fan_in()});
            check_blob_shape(ck.find(b), b, Shape{l.c_out});
            p.weight = from_blob(*ck.find(w));
            p.bias = from_blob(*ck.find(b));
            if (l.pecan()) {
                std::vector<Tensor> groups;
                for (std::size_t j = 0; j < l.groups; ++j) {
                    const std::string name = l.name + ".codebook." + std::to_string(j);
                    const Blob* blob = ck.find(name);
                    if (!blob) throw FormatError("checkpoint lacks blob '" + name + "'");
                    groups.push_back(from_blob(*blob));
                }
                p.codebook = Codebook(l.dim, std::move(groups));
            }
        }
        m.params.push_back(std::move(p));
    }
    return m;
}

std::string manifest_json(const Checkpoint& ck) { return manifest(ck).dump(2); }

std::vector<unsigned char> encode_checkpoint(const Checkpoint& ck) {
    static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);
    Writer w;
    w.bytes(kMagic, sizeof kMagic);
    w.le<std::uint32_t>(ck.version);
    const std::string text = manifest_json(ck);
    w.le<std::uint64_t>(text.size());
    w.bytes(text.data(), text.size());
    w.le<std::uint64_t>(ck.blobs.size());
    for (const Blob& b : ck.blobs) {
        if (b.data.size() != element_count(b.shape)) {
            throw ShapeError("blob '" + b.name + "' holds " + std::to_string(b.data.size()) + " values for shape " +
                             to_string(b.shape));
        }
        w.le<std::uint64_t>(b.name.size());
        w.bytes(b.name.data(), b.name.size());
        w.le<std::uint32_t>(static_cast<std::uint32_t>(b.shape.size()));
        for (std::size_t e : b.shape) w.le<std::uint64_t>(e);
        for (float f : b.data) w.le<std::uint32_t>(std::bit_cast<std::uint32_t>(f));
    }
    return std::move(w.out);
}

Checkpoint decode_checkpoint(const std::vector<unsigned char>& bytes) {
    Reader r(bytes);
    if (r.str(sizeof kMagic, "magic") != std::string(kMagic, sizeof kMagic)) throw FormatError("not a checkpoint file");
    Checkpoint ck;
    ck.version = r.le<std::uint32_t>("version");
    if (ck.version != kCheckpointVersion) {
        throw FormatError("checkpoint format version " + std::to_string(ck.version) + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
    }
    const auto text_len = r.le<std::uint64_t>("manifest length");
    const std::string text = r.str(text_len, "manifest");
    try {
        const json m = json::parse(text);
        if (m.at("format_version").get<std::uint32_t>() != ck.version) {
            throw FormatError("manifest version disagrees with the file header");
        }
        ck.seed = m.at("seed").get<std::uint64_t>();
        ck.epoch = m.at("epoch").get<int>();
        ck.calibrated = m.at("calibrated").get<bool>();
        const json& net = m.at("network");
        ck.spec.arch = net.at("arch").get<std::string>();
        const auto input = net.at("input").get<std::vector<std::size_t>>();
        if (input.size() != 3) throw FormatError("manifest: input must list channels, height, width");
        ck.spec.in_channels = input[0];
        ck.spec.in_height = input[1];
        ck.spec.in_width = input[2];
        for (const json& l : net.at("layers")) ck.spec.layers.push_back(layer_from_json(l));
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed checkpoint manifest: ") + e.what());
    }
    try {
        ck.spec.resolve();
    } catch (const Error& e) {
        throw FormatError(std::string("checkpoint network is invalid: ") + e.what());
    }
    const auto count = r.le<std::uint64_t>("blob count");
    for (std::uint64_t i = 0; i < count; ++i) {
        Blob b;
        const auto name_len = r.le<std::uint64_t>("blob name length");
        b.name = r.str(name_len, "blob name");
        const auto rank = r.le<std::uint32_t>("blob rank");
        r.need(std::uint64_t(rank) * 8, "blob shape");
        std::uint64_t elements = 1;
        for (std::uint32_t a = 0; a < rank; ++a) {
            const auto e = r.le<std::uint64_t>("blob extent");
            if (e == 0) throw FormatError("blob '" + b.name + "' has a zero extent");
            if (elements > (bytes.size() / 4) / e) throw FormatError("truncated checkpoint: blob '" + b.name + "' is larger than the file");
            elements *= e;
            b.shape.push_back(e);
        }
        r.need(elements * 4, "blob data");
        b.data.resize(elements);
        for (float& f : b.data) f = std::bit_cast<float>(r.le<std::uint32_t>("blob value"));
        ck.blobs.push_back(std::move(b));
    }
    if (r.pos != bytes.size()) throw FormatError("checkpoint has " + std::to_string(bytes.size() - r.pos) + " trailing bytes");
    validate_blobs(ck);
    return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
    const auto bytes = encode_checkpoint(ck);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return decode_checkpoint(bytes);
}

} // namespace pecan
