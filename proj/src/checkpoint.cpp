#include "divrank/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <json.hpp>

#include "divrank/corpus_io.hpp"
#include "divrank/error.hpp"

namespace divrank {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'D', 'R', 'C', 'K'};
constexpr std::size_t kPrefix = 20;

void put_le(std::vector<unsigned char>& out, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::uint64_t get_le(const unsigned char* p, int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

struct TensorWriter {
    json table = json::array();
    std::vector<unsigned char> payload;

    void add(const std::string& name, const Matrix& m) {
        table.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"offset", payload.size()}});
        for (double v : m.flat()) put_le(payload, std::bit_cast<std::uint64_t>(v), 8);
    }
    void add_store(const std::string& prefix, const ParamStore& store) {
        for (const auto& p : store.params()) add(prefix + p.name, p.value);
    }
};

class TensorReader {
public:
    TensorReader(const json& table, const unsigned char* payload, std::size_t size) {
        for (const auto& t : table) {
            const auto rows = t.at("rows").get<std::size_t>(), cols = t.at("cols").get<std::size_t>();
            const auto offset = t.at("offset").get<std::size_t>();
            if (offset > size || rows * cols > (size - offset) / 8)
                throw FormatError("malformed checkpoint", "tensor out of bounds");
            Matrix m(rows, cols);
            for (std::size_t i = 0; i < m.size(); ++i)
                m.flat()[i] = std::bit_cast<double>(get_le(payload + offset + 8 * i, 8));
            tensors_.emplace_back(t.at("name").get<std::string>(), std::move(m));
        }
    }
    Matrix take(const std::string& name) const {
        for (const auto& [n, m] : tensors_)
            if (n == name) return m;
        throw FormatError("malformed checkpoint", "missing tensor " + name);
    }
    // Loads every tensor under `prefix` into a fresh store, in file order.
    ParamStore store(const std::string& prefix) const {
        ParamStore s;
        for (const auto& [n, m] : tensors_)
            if (n.rfind(prefix, 0) == 0) s.add(n.substr(prefix.size()), m);
        return s;
    }

private:
    std::vector<std::pair<std::string, Matrix>> tensors_;
};

void check_shape(const Matrix& m, std::size_t rows, std::size_t cols, const std::string& what) {
    if (m.rows() != rows || m.cols() != cols) throw FormatError("malformed checkpoint", "bad shape for " + what);
}

}  // namespace

std::vector<unsigned char> serialize_checkpoint(const Checkpoint& ckpt) {
    TensorWriter tw;
    tw.add_store("reencoder/", ckpt.reencoder.params);
    tw.add("bank/prototypes", ckpt.bank.prototypes);
    json header = {
        {"config", ckpt.config},
        {"reencoder", {{"dim", ckpt.reencoder.dim}, {"hidden", ckpt.reencoder.hidden}, {"beta", ckpt.reencoder.beta}}},
        {"bank", {{"category_ids", ckpt.bank.category_ids}}},
        {"steps", {{"scl", ckpt.scl_steps}, {"ttc", ckpt.ttc_steps}}},
        {"rng_labels", ckpt.rng_labels},
    };
    if (ckpt.ttc) {
        const auto& m = *ckpt.ttc;
        tw.add_store("ttc/", m.params);
        header["ttc"] = {{"dim", m.transformer.dim},
                         {"layers", m.transformer.layers},
                         {"heads", m.transformer.heads},
                         {"ffn_dim", m.transformer.ffn_dim},
                         {"budget", m.sequence_budget},
                         {"category_ids", m.labels.category_ids()}};
    } else {
        header["ttc"] = nullptr;
    }
    header["tensors"] = tw.table;
    const std::string text = header.dump();

    std::vector<unsigned char> out(kMagic, kMagic + 4);
    out.push_back(static_cast<unsigned char>(kCheckpointVersion));
    out.insert(out.end(), 3, 0);
    put_le(out, text.size(), 4);
    put_le(out, tw.payload.size(), 8);
    out.insert(out.end(), text.begin(), text.end());
    out.insert(out.end(), tw.payload.begin(), tw.payload.end());
    put_le(out, crc32_of(out), 4);
    return out;
}

Checkpoint deserialize_checkpoint(const std::vector<unsigned char>& bytes) {
    if (bytes.size() < 4) throw FormatError("truncated checkpoint", "file shorter than magic");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("bad magic", "not a DRCK checkpoint");
    if (bytes.size() < 5) throw FormatError("truncated checkpoint", "missing version");
    if (bytes[4] != kCheckpointVersion)
        throw FormatError("unsupported version", "checkpoint version " + std::to_string(bytes[4]));
    if (bytes.size() < kPrefix) throw FormatError("truncated checkpoint", "short prefix");
    const std::uint64_t hlen = get_le(bytes.data() + 8, 4);
    const std::uint64_t plen = get_le(bytes.data() + 12, 8);
    const std::uint64_t body = bytes.size() - kPrefix;
    if (hlen > body || plen > body - hlen || body - hlen - plen < 4)
        throw FormatError("truncated checkpoint", "expected " + std::to_string(kPrefix + hlen + plen + 4) + " bytes");
    const std::size_t end = kPrefix + hlen + plen;
    if (bytes.size() != end + 4) throw FormatError("malformed checkpoint", "trailing bytes");
    const auto stored = static_cast<std::uint32_t>(get_le(bytes.data() + end, 4));
    if (crc32_of(std::span(bytes.data(), end)) != stored) throw FormatError("checksum mismatch", "checkpoint");

    Checkpoint ck;
    try {
        const json h = json::parse(bytes.begin() + kPrefix, bytes.begin() + static_cast<std::ptrdiff_t>(kPrefix + hlen));
        const TensorReader tensors(h.at("tensors"), bytes.data() + kPrefix + hlen, plen);
        ck.config = h.at("config").get<ConfigMap>();
        ck.scl_steps = h.at("steps").at("scl").get<long>();
        ck.ttc_steps = h.at("steps").at("ttc").get<long>();
        ck.rng_labels = h.at("rng_labels").get<std::vector<std::string>>();

        const auto& re = h.at("reencoder");
        ck.reencoder.dim = re.at("dim").get<int>();
        ck.reencoder.hidden = re.at("hidden").get<int>();
        ck.reencoder.beta = re.at("beta").get<double>();
        ck.reencoder.params = tensors.store("reencoder/");
        const auto d = static_cast<std::size_t>(ck.reencoder.dim), hd = static_cast<std::size_t>(ck.reencoder.hidden);
        check_shape(ck.reencoder.params.value("g.w1"), d, hd, "g.w1");
        check_shape(ck.reencoder.params.value("g.b1"), 1, hd, "g.b1");
        check_shape(ck.reencoder.params.value("g.w2"), hd, d, "g.w2");
        check_shape(ck.reencoder.params.value("g.b2"), 1, d, "g.b2");

        ck.bank.category_ids = h.at("bank").at("category_ids").get<std::vector<int>>();
        ck.bank.prototypes = tensors.take("bank/prototypes");
        check_shape(ck.bank.prototypes, ck.bank.category_ids.size(), d, "bank/prototypes");
        ck.bank.reindex();

        if (!h.at("ttc").is_null()) {
            const auto& t = h.at("ttc");
            TokenClassifierModel m;
            m.transformer.dim = t.at("dim").get<int>();
            m.transformer.layers = t.at("layers").get<int>();
            m.transformer.heads = t.at("heads").get<int>();
            m.transformer.ffn_dim = t.at("ffn_dim").get<int>();
            m.transformer.validate();
            m.sequence_budget = t.at("budget").get<std::size_t>();
            m.labels = LabelSpace(t.at("category_ids").get<std::vector<int>>());
            m.params = tensors.store("ttc/");
            check_shape(m.params.value("head.w"), static_cast<std::size_t>(m.transformer.dim),
                        static_cast<std::size_t>(m.labels.num_classes()), "head.w");
            ck.ttc = std::move(m);
        }
    } catch (const json::exception& e) {
        throw FormatError("malformed checkpoint", e.what());
    } catch (const ContractViolation& e) {
        throw FormatError("malformed checkpoint", e.what());
    } catch (const ConfigError& e) {
        throw FormatError("malformed checkpoint", e.what());
    }
    return ck;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    const auto bytes = serialize_checkpoint(ckpt);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return deserialize_checkpoint(bytes);
}

}  // namespace divrank
