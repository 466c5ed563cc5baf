#include "contrastscore/ingest.hpp"

#include "contrastscore/interchange.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

namespace contrastscore {

using nlohmann::json;

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

/// A line of a text file with its provenance.
struct Line {
    std::string_view text;
    std::size_t number;
    std::size_t offset;
};

std::vector<Line> split_lines(std::string_view content, std::size_t base_offset) {
    std::vector<Line> lines;
    std::size_t number = 0, offset = base_offset;
    while (!content.empty()) {
        const auto nl = content.find('\n');
        auto text = content.substr(0, nl);
        ++number;
        if (!text.empty() && text.back() == '\r') text.remove_suffix(1);
        lines.push_back({text, number, offset});
        if (nl == std::string_view::npos) break;
        content.remove_prefix(nl + 1);
        offset += nl + 1;
    }
    return lines;
}

std::string where(const std::filesystem::path &path, const Line &line) {
    return path.string() + ":" + std::to_string(line.number) + " (byte " + std::to_string(line.offset) + ")";
}

json parse_json_line(const std::filesystem::path &path, const Line &line) {
    try {
        auto obj = json::parse(line.text);
        if (!obj.is_object()) throw Error(ErrorKind::MalformedRecord, where(path, line) + ": record is not an object");
        return obj;
    } catch (const json::parse_error &e) {
        throw Error(ErrorKind::MalformedRecord, where(path, line) + ": " + e.what());
    }
}

std::string json_string(const json &obj, const char *name, const std::string &ctx) {
    const auto it = obj.find(name);
    if (it == obj.end()) throw Error(ErrorKind::MalformedRecord, ctx + ": missing field '" + name + "'");
    if (it->is_string()) return it->get<std::string>();
    if (it->is_number_integer()) return std::to_string(it->get<long long>());
    throw Error(ErrorKind::MalformedRecord, ctx + ": field '" + name + "' is not a string");
}

const std::filesystem::path &require_path(const DatasetManifest &m, const std::string &role) {
    const auto it = m.paths.find(role);
    if (it == m.paths.end())
        throw Error(ErrorKind::Config, "manifest for " + m.dataset_id + " lacks path '" + role + "'");
    return it->second;
}

void finish(LoadResult &result) {
    std::sort(result.instances.begin(), result.instances.end(),
              [](const EvaluationInstance &a, const EvaluationInstance &b) { return a.key < b.key; });
}

} // namespace

DatasetManifest load_manifest(const std::filesystem::path &path) {
    const auto content = read_file(path);
    json doc;
    try {
        doc = json::parse(strip_bom(content));
    } catch (const json::parse_error &e) {
        throw Error(ErrorKind::Config, path.string() + ": " + e.what());
    }
    const std::string ctx = path.string();
    DatasetManifest m;
    try {
        m.dataset_id = doc.at("dataset_id").get<std::string>();
        m.group = doc.value("group", std::string{});
        const auto task = doc.at("task").get<std::string>();
        if (task == "summarization") m.task = Task::summarization;
        else if (task == "translation") m.task = Task::translation;
        else throw Error(ErrorKind::Config, ctx + ": unknown task '" + task + "'");
        const auto format = doc.at("format").get<std::string>();
        if (format == "summeval") m.format = DatasetFormat::summeval;
        else if (format == "qags") m.format = DatasetFormat::qags;
        else if (format == "mqm") m.format = DatasetFormat::mqm;
        else throw Error(ErrorKind::Config, ctx + ": unknown format '" + format + "'");
        if (doc.contains("language_pair")) {
            const auto lp = doc.at("language_pair").get<std::vector<std::string>>();
            if (lp.size() != 2) throw Error(ErrorKind::Config, ctx + ": language_pair needs two codes");
            m.language_pair = std::pair{lp[0], lp[1]};
        }
        m.dimensions = doc.at("dimensions").get<std::vector<std::string>>();
        m.annotators = doc.value("annotators", std::string("experts"));
        for (const auto &[role, p] : doc.at("paths").items()) {
            std::filesystem::path resolved = p.get<std::string>();
            if (resolved.is_relative()) resolved = path.parent_path() / resolved;
            m.paths[role] = resolved.lexically_normal();
        }
    } catch (const json::exception &e) {
        throw Error(ErrorKind::Config, ctx + ": " + e.what());
    }
    validate(m);
    return m;
}

void validate(const DatasetManifest &m) {
    if (m.dataset_id.empty()) throw Error(ErrorKind::Config, "manifest without dataset_id");
    if (m.dimensions.empty()) throw Error(ErrorKind::Config, m.dataset_id + ": manifest lists no dimensions");
    if (m.task == Task::translation && !m.language_pair)
        throw Error(ErrorKind::Config, m.dataset_id + ": translation manifest needs language_pair");
    if (m.annotators != "experts" && m.annotators != "turkers" && m.annotators != "all")
        throw Error(ErrorKind::Config, m.dataset_id + ": annotators must be experts, turkers or all");
}

SeverityWeights SeverityWeights::parse(const std::string &text) {
    SeverityWeights w;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw Error(ErrorKind::Config, "severity weight '" + item + "' must be key=value");
        auto key = lower(trim(item.substr(0, eq)));
        const auto value_text = trim(item.substr(eq + 1));
        double value = 0.0;
        const auto *end = value_text.data() + value_text.size();
        auto [ptr, ec] = std::from_chars(value_text.data(), end, value);
        if (ec != std::errc{} || ptr != end)
            throw Error(ErrorKind::Config, "severity weight '" + item + "' has a non-numeric value");
        if (key.rfind("category:", 0) == 0) w.category[key.substr(9)] = value;
        else w.severity[key] = value;
    }
    return w;
}

LoadResult load_summeval(const DatasetManifest &manifest) {
    const auto &path = require_path(manifest, "annotations");
    const auto content = read_file(path);
    const auto body = strip_bom(content);
    LoadResult result;
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto &line : split_lines(body, content.size() - body.size())) {
        if (trim(line.text).empty()) continue;
        const auto obj = parse_json_line(path, line);
        const auto ctx = where(path, line);
        EvaluationInstance inst;
        inst.key = {manifest.dataset_id, json_string(obj, "id", ctx), json_string(obj, "model_id", ctx)};
        inst.hypothesis = json_string(obj, "decoded", ctx);
        inst.source = obj.contains("text") ? json_string(obj, "text", ctx) : std::string{};
        if (obj.contains("references")) {
            try {
                inst.references = obj.at("references").get<std::vector<std::string>>();
            } catch (const json::exception &) {
                throw Error(ErrorKind::MalformedRecord, ctx + ": 'references' is not a list of strings");
            }
        }
        std::vector<json> annotations;
        for (const char *group : {"expert_annotations", "turker_annotations"}) {
            const bool wanted = manifest.annotators == "all" ||
                                (manifest.annotators == "experts" && group[0] == 'e') ||
                                (manifest.annotators == "turkers" && group[0] == 't');
            if (!wanted || !obj.contains(group)) continue;
            if (!obj.at(group).is_array()) throw Error(ErrorKind::MalformedRecord, ctx + ": '" + group + "' is not a list");
            for (const auto &a : obj.at(group)) annotations.push_back(a);
        }
        if (annotations.empty())
            throw Error(ErrorKind::MissingAnnotation, ctx + ": no " + manifest.annotators + " annotations");
        for (const auto &dim : manifest.dimensions) {
            double sum = 0.0;
            for (const auto &a : annotations) {
                if (!a.is_object() || !a.contains(dim) || !a.at(dim).is_number())
                    throw Error(ErrorKind::MissingAnnotation, ctx + ": annotation lacks numeric '" + dim + "'");
                sum += a.at(dim).get<double>();
            }
            inst.human_scores[dim] = sum / static_cast<double>(annotations.size());
        }
        if (!seen.insert({inst.key.segment_id, inst.key.system_id}).second)
            throw Error(ErrorKind::DuplicateRecord, ctx + ": " + inst.key.str());
        if (trim(inst.hypothesis).empty()) {
            result.warnings.push_back(ctx + ": empty summary for " + inst.key.str() + " skipped");
            ++result.skipped;
            continue;
        }
        validate(inst);
        result.instances.push_back(std::move(inst));
    }
    if (result.instances.empty() && result.skipped == 0)
        throw Error(ErrorKind::MalformedRecord, path.string() + ": no records");
    finish(result);
    return result;
}

LoadResult load_qags(const DatasetManifest &manifest) {
    const auto &path = require_path(manifest, "annotations");
    const auto content = read_file(path);
    const auto body = strip_bom(content);
    const std::string dim = manifest.dimensions.front();
    LoadResult result;
    std::size_t index = 0;
    for (const auto &line : split_lines(body, content.size() - body.size())) {
        if (trim(line.text).empty()) continue;
        const auto obj = parse_json_line(path, line);
        const auto ctx = where(path, line);
        EvaluationInstance inst;
        const std::string seg = obj.contains("id") ? json_string(obj, "id", ctx) : std::to_string(index);
        std::string system = "bart";
        if (obj.contains("system")) system = json_string(obj, "system", ctx);
        else if (obj.contains("model_id")) system = json_string(obj, "model_id", ctx);
        ++index;
        inst.key = {manifest.dataset_id, seg, system};
        inst.source = obj.contains("article") ? json_string(obj, "article", ctx) : std::string{};
        const auto it = obj.find("summary_sentences");
        if (it == obj.end() || !it->is_array() || it->empty())
            throw Error(ErrorKind::MalformedRecord, ctx + ": missing 'summary_sentences'");
        double total = 0.0;
        for (const auto &sentence : *it) {
            if (!sentence.is_object()) throw Error(ErrorKind::MalformedRecord, ctx + ": sentence is not an object");
            const auto text = json_string(sentence, "sentence", ctx);
            if (!inst.hypothesis.empty()) inst.hypothesis += ' ';
            inst.hypothesis += text;
            const auto responses = sentence.find("responses");
            if (responses == sentence.end() || !responses->is_array() || responses->empty())
                throw Error(ErrorKind::MissingAnnotation, ctx + ": sentence without responses");
            long yes = 0;
            for (const auto &r : *responses) {
                const auto answer = lower(trim(json_string(r, "response", ctx)));
                if (answer == "yes") ++yes;
                else if (answer != "no")
                    throw Error(ErrorKind::MalformedRecord, ctx + ": response must be yes or no, got '" + answer + "'");
            }
            total += static_cast<double>(yes) / static_cast<double>(responses->size());
        }
        inst.human_scores[dim] = total / static_cast<double>(it->size());
        if (trim(inst.hypothesis).empty()) {
            result.warnings.push_back(ctx + ": empty summary skipped");
            ++result.skipped;
            continue;
        }
        validate(inst);
        result.instances.push_back(std::move(inst));
    }
    if (index == 0) throw Error(ErrorKind::MalformedRecord, path.string() + ": no records");
    finish(result);
    return result;
}

LoadResult load_mqm(const DatasetManifest &manifest, const SeverityWeights &weights, bool strict) {
    const auto &path = require_path(manifest, "annotations");
    const auto content = read_file(path);
    const auto body = strip_bom(content);
    const auto lines = split_lines(body, content.size() - body.size());
    if (lines.empty() || trim(lines.front().text).empty())
        throw Error(ErrorKind::MalformedRecord, path.string() + ": empty file");

    auto split_tabs = [](std::string_view text) {
        std::vector<std::string_view> cols;
        std::size_t start = 0;
        while (true) {
            const auto tab = text.find('\t', start);
            cols.push_back(text.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
            if (tab == std::string_view::npos) break;
            start = tab + 1;
        }
        return cols;
    };
    const auto header = split_tabs(lines.front().text);
    std::map<std::string, std::size_t> column;
    for (std::size_t i = 0; i < header.size(); ++i) column[lower(trim(header[i]))] = i;
    for (const char *needed : {"system", "seg_id", "rater", "source", "target", "category", "severity"})
        if (!column.count(needed))
            throw Error(ErrorKind::MalformedRecord, where(path, lines.front()) + ": header lacks column '" + needed + "'");

    struct Cell {
        std::string source, target, reference;
        std::map<std::string, double> per_rater;
    };
    std::map<std::string, std::map<std::string, Cell>, bool (*)(std::string_view, std::string_view)> grid(natural_less);
    std::set<std::string, bool (*)(std::string_view, std::string_view)> systems(natural_less);

    for (std::size_t li = 1; li < lines.size(); ++li) {
        const auto &line = lines[li];
        if (trim(line.text).empty()) continue;
        const auto cols = split_tabs(line.text);
        if (cols.size() != header.size())
            throw Error(ErrorKind::MalformedRecord, where(path, line) + ": expected " + std::to_string(header.size()) +
                                                        " columns, found " + std::to_string(cols.size()));
        auto col = [&](const char *name) { return std::string(cols[column.at(name)]); };
        const auto system = trim(col("system"));
        const auto seg = trim(col("seg_id"));
        const auto severity = lower(trim(col("severity")));
        const auto category = lower(trim(col("category")));
        double penalty = 0.0;
        if (const auto c = weights.category.find(category); c != weights.category.end()) {
            penalty = c->second;
        } else if (const auto s = weights.severity.find(severity); s != weights.severity.end()) {
            penalty = s->second;
        } else {
            throw Error(ErrorKind::UnknownSeverity, where(path, line) + ": severity '" + severity + "' (category '" +
                                                        category + "') has no weight");
        }
        systems.insert(system);
        auto &cell = grid[seg][system];
        cell.source = col("source");
        cell.target = col("target");
        if (column.count("reference")) cell.reference = col("reference");
        cell.per_rater[trim(col("rater"))] += penalty;
    }

    LoadResult result;
    for (const auto &[seg, row] : grid) {
        for (const auto &system : systems) {
            const auto it = row.find(system);
            if (it == row.end()) {
                const std::string msg = "segment " + seg + " has no output for system " + system;
                if (strict) throw Error(ErrorKind::MissingSystemOutput, manifest.dataset_id + ": " + msg);
                result.warnings.push_back(manifest.dataset_id + ": " + msg + " (skipped)");
                ++result.skipped;
                continue;
            }
            const auto &cell = it->second;
            if (trim(cell.target).empty()) {
                result.warnings.push_back(manifest.dataset_id + ": empty target for segment " + seg + ", system " +
                                          system + " (skipped)");
                ++result.skipped;
                continue;
            }
            double sum = 0.0;
            for (const auto &[rater, p] : cell.per_rater) sum += p;
            EvaluationInstance inst;
            inst.key = {manifest.dataset_id, seg, system};
            inst.source = cell.source;
            inst.hypothesis = cell.target;
            if (!trim(cell.reference).empty()) inst.references = std::vector<std::string>{cell.reference};
            inst.human_scores["mqm"] = sum / static_cast<double>(cell.per_rater.size());
            if (manifest.dimensions.front() != "mqm") inst.human_scores[manifest.dimensions.front()] = inst.human_scores["mqm"];
            validate(inst);
            result.instances.push_back(std::move(inst));
        }
    }
    finish(result);
    return result;
}

LoadResult load_dataset(const DatasetManifest &manifest, const SeverityWeights &weights) {
    switch (manifest.format) {
    case DatasetFormat::summeval: return load_summeval(manifest);
    case DatasetFormat::qags: return load_qags(manifest);
    case DatasetFormat::mqm: return load_mqm(manifest, weights);
    }
    throw Error(ErrorKind::Config, "unknown dataset format");
}

TokenProbLoad load_tokenprobs(const std::vector<std::filesystem::path> &paths, bool strict) {
    std::vector<std::vector<TokenProbRecord>> per_file(paths.size());
    std::vector<std::optional<Error>> file_errors(paths.size());
    const auto n = static_cast<long>(paths.size());
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < n; ++i) {
        try {
            per_file[static_cast<std::size_t>(i)] = read_records(paths[static_cast<std::size_t>(i)]);
        } catch (const Error &e) {
            file_errors[static_cast<std::size_t>(i)] = e;
        }
    }
    for (const auto &e : file_errors)
        if (e) throw *e; // a file that does not parse is never a per-key problem

    struct Slot {
        std::optional<TokenProbSequence> expert, amateur;
        bool duplicate = false;
    };
    std::map<InstanceKey, Slot> slots;
    for (auto &records : per_file)
        for (auto &rec : records) {
            auto &slot = slots[rec.key];
            auto &side = rec.sequence.role == Role::expert ? slot.expert : slot.amateur;
            if (side) slot.duplicate = true;
            else side = std::move(rec.sequence);
        }

    TokenProbLoad out;
    auto fail = [&](const InstanceKey &key, Error e) {
        if (strict) throw e;
        out.failures.emplace_back(key, std::move(e));
    };
    for (auto &[key, slot] : slots) {
        if (slot.expert) out.experts.emplace(key, *slot.expert);
        if (slot.duplicate) {
            fail(key, Error(ErrorKind::DuplicateRecord, key.str() + " has more than one record for a role"));
            continue;
        }
        if (!slot.expert || !slot.amateur) {
            fail(key, Error(ErrorKind::MissingRole, key.str() + " lacks the " +
                                                        std::string(slot.expert ? "amateur" : "expert") + " record"));
            continue;
        }
        try {
            out.pairs.emplace(key, validate_alignment(std::move(*slot.expert), std::move(*slot.amateur), key));
        } catch (const Error &e) {
            fail(key, Error(e.kind(), key.str() + ": " + e.what()));
        }
    }
    return out;
}

} // namespace contrastscore
