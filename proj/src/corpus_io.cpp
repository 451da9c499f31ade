#include "divrank/corpus_io.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <sstream>
#include <vector>

#include "divrank/error.hpp"

namespace divrank {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kManifestSuffix[] = ".manifest.jsonl";
constexpr char kBlobMagic[8] = {'D', 'R', 'C', '1', 'B', 'L', 'O', 'B'};

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void put_f32_le(std::vector<unsigned char>& out, double v) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(bits >> (8 * i)));
}

float get_f32_le(const unsigned char* p) {
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return std::bit_cast<float>(bits);
}

std::vector<unsigned char> read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + p.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

template <typename T>
T field(const json& j, const char* key) {
    if (!j.contains(key)) throw FormatError("malformed manifest", std::string("missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw FormatError("malformed manifest", std::string("field '") + key + "': " + e.what());
    }
}

}  // namespace

std::uint32_t crc32_of(std::span<const unsigned char> bytes) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    crc = ::crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
    return static_cast<std::uint32_t>(crc);
}

std::string resolve_manifest_path(const std::string& path) {
    return ends_with(path, kManifestSuffix) ? path : path + kManifestSuffix;
}

void save_corpus(const EmbeddingCorpus& corpus, const std::string& path) {
    const fs::path manifest = resolve_manifest_path(path);
    std::string name = manifest.filename().string();
    name.resize(name.size() - std::strlen(kManifestSuffix));
    const std::string blob_name = name + ".f32";
    const fs::path blob = manifest.parent_path() / blob_name;

    const std::size_t d = corpus.dim;
    const std::size_t count = corpus.queries.size() + corpus.images.size() + corpus.descriptors.size();

    std::vector<unsigned char> bytes(kBlobMagic, kBlobMagic + 8);
    bytes.reserve(8 + count * d * 4);
    std::ostringstream lines;
    json header = {{"magic", "DRC1"}, {"version", kCorpusFormatVersion}, {"dim", d},
                   {"count", count},  {"blob", blob_name},                {"split", corpus.split}};
    lines << header.dump() << '\n';

    std::size_t row = 0;
    auto append = [&](const Vec& f) {
        require(f.size() == d, "save_corpus: feature dim mismatch");
        for (double v : f) put_f32_le(bytes, v);
        return row++;
    };
    for (const auto& q : corpus.queries) {
        json j = {{"type", "query"},
                  {"query_id", q.query_id},
                  {"gt_categories", q.gt_categories},
                  {"candidate_ids", q.candidate_ids},
                  {"split", q.split},
                  {"row", append(q.feature)}};
        lines << j.dump() << '\n';
    }
    for (const auto& img : corpus.images) {
        json j = {{"type", "image"},         {"image_id", img.image_id}, {"query_id", img.query_id},
                  {"category", img.category}, {"relevant", img.relevant}, {"row", append(img.feature)}};
        lines << j.dump() << '\n';
    }
    for (const auto& desc : corpus.descriptors) {
        json j = {{"type", "descriptor"}, {"category_id", desc.category_id}, {"row", append(desc.feature)}};
        lines << j.dump() << '\n';
    }
    lines << json{{"crc32", crc32_of(bytes)}}.dump() << '\n';

    {
        std::ofstream out(blob, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + blob.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }
    std::ofstream out(manifest, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + manifest.string());
    out << lines.str();
}

EmbeddingCorpus load_corpus(const std::string& path) {
    const fs::path manifest = resolve_manifest_path(path);
    std::ifstream in(manifest, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + manifest.string());

    std::vector<json> entries;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            entries.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw FormatError("malformed manifest", e.what());
        }
    }
    if (entries.empty()) throw FormatError("malformed manifest", "empty manifest");

    const json& header = entries.front();
    if (!header.is_object() || !header.contains("magic") || header["magic"] != "DRC1")
        throw FormatError("bad magic", "manifest header");
    if (field<int>(header, "version") != kCorpusFormatVersion)
        throw FormatError("unsupported version", std::to_string(field<int>(header, "version")));
    if (entries.size() < 2 || !entries.back().contains("crc32")) throw FormatError("missing checksum", "");

    const auto d = field<std::size_t>(header, "dim");
    const auto count = field<std::size_t>(header, "count");
    const auto blob_name = field<std::string>(header, "blob");
    if (d == 0) throw FormatError("malformed manifest", "dim must be positive");

    const auto bytes = read_file(manifest.parent_path() / blob_name);
    if (bytes.size() < 8) throw FormatError("truncated blob", "missing blob header");
    if (std::memcmp(bytes.data(), kBlobMagic, 8) != 0) throw FormatError("bad magic", "blob header");
    if (bytes.size() < 8 + count * d * 4) throw FormatError("truncated blob", blob_name);
    if (crc32_of(bytes) != field<std::uint32_t>(entries.back(), "crc32"))
        throw FormatError("checksum mismatch", blob_name);

    auto read_row = [&](const json& j) {
        const auto row = field<long long>(j, "row");
        if (row < 0 || static_cast<std::size_t>(row) >= count)
            throw FormatError("blob bounds", "row " + std::to_string(row) + " of " + std::to_string(count));
        Vec f(d);
        const unsigned char* p = bytes.data() + 8 + static_cast<std::size_t>(row) * d * 4;
        for (std::size_t c = 0; c < d; ++c) f[c] = static_cast<double>(get_f32_le(p + 4 * c));
        double n2 = 0.0;
        for (double v : f) {
            if (!std::isfinite(v)) throw FormatError("malformed blob", "non-finite feature");
            n2 += v * v;
        }
        if (n2 == 0.0) throw FormatError("malformed blob", "zero feature at row " + std::to_string(row));
        canonicalize_feature(f);
        return f;
    };

    EmbeddingCorpus c;
    c.dim = d;
    c.split = header.value("split", std::string("all"));
    for (std::size_t i = 1; i + 1 < entries.size(); ++i) {
        const json& j = entries[i];
        const auto type = field<std::string>(j, "type");
        if (type == "query") {
            QueryRecord q;
            q.query_id = field<QueryId>(j, "query_id");
            q.gt_categories = field<std::vector<int>>(j, "gt_categories");
            q.candidate_ids = field<std::vector<ImageId>>(j, "candidate_ids");
            q.split = j.value("split", std::string("train"));
            q.feature = read_row(j);
            c.queries.push_back(std::move(q));
        } else if (type == "image") {
            ImageRecord img;
            img.image_id = field<ImageId>(j, "image_id");
            img.query_id = field<QueryId>(j, "query_id");
            img.category = field<int>(j, "category");
            img.relevant = field<bool>(j, "relevant");
            img.feature = read_row(j);
            c.images.push_back(std::move(img));
        } else if (type == "descriptor") {
            CategoryDescriptor desc;
            desc.category_id = field<int>(j, "category_id");
            desc.feature = read_row(j);
            c.descriptors.push_back(std::move(desc));
        } else {
            throw FormatError("malformed manifest", "unknown entity type '" + type + "'");
        }
    }
    c.reindex();
    return c;
}

}  // namespace divrank
