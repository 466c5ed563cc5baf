#include "contrastscore/interchange.hpp"

#include "contrastscore/error.hpp"

#include <json.hpp>

#include <atomic>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace contrastscore {

using nlohmann::json;

namespace {

template <typename T> T field(const json &obj, const char *name, std::string_view where) {
    const auto it = obj.find(name);
    if (it == obj.end())
        throw Error(ErrorKind::MalformedRecord, std::string(where) + "missing field '" + name + "'");
    try {
        return it->get<T>();
    } catch (const json::exception &) {
        throw Error(ErrorKind::MalformedRecord, std::string(where) + "field '" + name + "' has the wrong type");
    }
}

} // namespace

std::string encode_record(const TokenProbRecord &record) {
    const auto &seq = record.sequence;
    nlohmann::ordered_json tokens = nlohmann::ordered_json::array();
    for (const auto &tok : seq.tokens) {
        nlohmann::ordered_json t;
        t["token_id"] = tok.token_id;
        t["text"] = tok.text;
        t["prob"] = tok.prob;
        if (!tok.top_k.empty()) t["top_k"] = tok.top_k;
        tokens.push_back(std::move(t));
    }
    // ordered_json keeps the documented field order on disk
    nlohmann::ordered_json out;
    out["dataset_id"] = record.key.dataset_id;
    out["segment_id"] = record.key.segment_id;
    out["system_id"] = record.key.system_id;
    out["model_id"] = seq.model_id;
    out["role"] = std::string(to_string(seq.role));
    out["temperature"] = seq.temperature;
    out["tokenizer_id"] = seq.tokenizer_id;
    out["tokens"] = std::move(tokens);
    return out.dump(-1, ' ', false, json::error_handler_t::replace);
}

TokenProbRecord decode_record(std::string_view line, std::string_view where) {
    json obj;
    try {
        obj = json::parse(line);
    } catch (const json::parse_error &e) {
        throw Error(ErrorKind::MalformedRecord, std::string(where) + e.what());
    }
    if (!obj.is_object()) throw Error(ErrorKind::MalformedRecord, std::string(where) + "record is not an object");
    TokenProbRecord rec;
    rec.key.dataset_id = field<std::string>(obj, "dataset_id", where);
    rec.key.segment_id = field<std::string>(obj, "segment_id", where);
    rec.key.system_id = field<std::string>(obj, "system_id", where);
    auto &seq = rec.sequence;
    seq.model_id = field<std::string>(obj, "model_id", where);
    try {
        seq.role = parse_role(field<std::string>(obj, "role", where));
    } catch (const Error &e) {
        if (e.kind() == ErrorKind::MalformedRecord) throw;
        throw Error(ErrorKind::MalformedRecord, std::string(where) + e.what());
    }
    seq.temperature = field<double>(obj, "temperature", where);
    seq.tokenizer_id = field<std::string>(obj, "tokenizer_id", where);
    const auto tokens = field<json>(obj, "tokens", where);
    if (!tokens.is_array()) throw Error(ErrorKind::MalformedRecord, std::string(where) + "'tokens' is not an array");
    seq.tokens.reserve(tokens.size());
    for (const auto &t : tokens) {
        if (!t.is_object()) throw Error(ErrorKind::MalformedRecord, std::string(where) + "token is not an object");
        TokenProb tok;
        tok.token_id = field<std::int64_t>(t, "token_id", where);
        tok.text = field<std::string>(t, "text", where);
        tok.prob = field<double>(t, "prob", where);
        if (t.contains("top_k")) tok.top_k = field<std::vector<std::int64_t>>(t, "top_k", where);
        seq.tokens.push_back(std::move(tok));
    }
    try {
        validate(seq);
    } catch (const Error &e) {
        throw Error(e.kind(), std::string(where) + e.what());
    }
    return rec;
}

std::vector<TokenProbRecord> read_records(const std::filesystem::path &path) {
    const std::string content = read_file(path);
    std::string_view text = strip_bom(content);
    std::vector<TokenProbRecord> out;
    std::size_t line_no = 0, offset = content.size() - text.size();
    while (!text.empty()) {
        const auto nl = text.find('\n');
        auto line = text.substr(0, nl);
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") != std::string_view::npos) {
            const std::string where = path.string() + ":" + std::to_string(line_no) + " (byte " +
                                      std::to_string(offset) + "): ";
            out.push_back(decode_record(line, where));
        }
        if (nl == std::string_view::npos) break;
        text.remove_prefix(nl + 1);
        offset += nl + 1;
    }
    return out;
}

void write_records(const std::filesystem::path &path, const std::vector<TokenProbRecord> &records) {
    std::string body;
    for (const auto &r : records) {
        body += encode_record(r);
        body += '\n';
    }
    write_file_atomic(path, body);
}

std::string encode_score_line(const InstanceKey &key, const std::string &scorer_id, double score) {
    nlohmann::ordered_json out;
    out["schema_version"] = kSchemaVersion;
    out["dataset_id"] = key.dataset_id;
    out["segment_id"] = key.segment_id;
    out["system_id"] = key.system_id;
    out["scorer_id"] = scorer_id;
    out["score"] = score;
    return out.dump();
}

void write_score_table(std::ostream &out, const ScoreTable &table) {
    for (const auto &[k, v] : table.entries()) out << encode_score_line(k.first, k.second, v) << '\n';
}

ScoreTable read_score_file(const std::filesystem::path &path) {
    const std::string content = read_file(path);
    std::istringstream in{std::string(strip_bom(content))};
    ScoreTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error &e) {
            throw Error(ErrorKind::MalformedRecord, where + e.what());
        }
        InstanceKey key{field<std::string>(obj, "dataset_id", where), field<std::string>(obj, "segment_id", where),
                        field<std::string>(obj, "system_id", where)};
        const auto scorer = field<std::string>(obj, "scorer_id", where);
        const auto score = field<double>(obj, "score", where);
        if (table.get(key, scorer))
            throw Error(ErrorKind::DuplicateRecord, where + key.str() + " / " + scorer);
        table.set(key, scorer, score);
    }
    return table;
}

void write_file_atomic(const std::filesystem::path &path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    static std::atomic<unsigned long> counter{0};
    tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter.fetch_add(1));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::Io, "cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error(ErrorKind::Io, "short write to " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw Error(ErrorKind::Io, "cannot rename into " + path.string() + ": " + ec.message());
    }
}

std::string read_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string_view strip_bom(std::string_view text) {
    if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF &&
        static_cast<unsigned char>(text[1]) == 0xBB && static_cast<unsigned char>(text[2]) == 0xBF)
        text.remove_prefix(3);
    return text;
}

} // namespace contrastscore
