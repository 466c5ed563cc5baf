#include "contrastscore/commands.hpp"

#include "contrastscore/batch.hpp"
#include "contrastscore/bench.hpp"
#include "contrastscore/error.hpp"
#include "contrastscore/interchange.hpp"
#include "contrastscore/metaeval.hpp"
#include "contrastscore/provider.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace contrastscore {

namespace fs = std::filesystem;

MetricRequest parse_metric(const std::string &text) {
    static const std::set<std::string> baselines{"bleu", "chrf", "rouge1", "rouge2", "rougel"};
    const auto head = text.substr(0, text.find(':'));
    MetricRequest req;
    if (baselines.count(head)) {
        req.baseline = head;
        req.id = head;
        const auto colon = text.find(':');
        if (colon != std::string::npos) {
            const auto rest = text.substr(colon + 1);
            if (rest.rfind("id=", 0) != 0 || rest.find(':') != std::string::npos)
                throw Error(ErrorKind::Config, "baseline scorers only accept an id= option: " + text);
            req.id = rest.substr(3);
        }
        return req;
    }
    req.spec = parse_scorer_spec(text);
    req.id = req.spec->scorer_id();
    return req;
}

ScoreRun score_all(const std::vector<MetricRequest> &requests, const std::vector<InstanceKey> &keys,
                   const std::map<InstanceKey, AlignedPair> &pairs,
                   const std::map<InstanceKey, EvaluationInstance> &instances,
                   const std::map<InstanceKey, std::string> &pair_problems, int threads) {
    ScoreRun run;
    std::vector<AlignedPair> batch;
    std::vector<InstanceKey> batch_keys;
    std::vector<InstanceKey> missing;
    for (const auto &k : keys) {
        if (const auto it = pairs.find(k); it != pairs.end()) {
            batch.push_back(it->second);
            batch_keys.push_back(k);
        } else {
            missing.push_back(k);
        }
    }
    for (const auto &req : requests) {
        if (req.spec) {
            for (const auto &k : missing) {
                const auto p = pair_problems.find(k);
                run.failures.emplace_back(k, req.id + ": " + (p != pair_problems.end() ? p->second
                                                                                       : "no token probabilities"));
            }
            const auto scores = score_batch(batch, *req.spec, threads);
            for (std::size_t i = 0; i < batch.size(); ++i) {
                if (scores.errors[i]) run.failures.emplace_back(batch_keys[i], req.id + ": " + scores.errors[i]->what());
                else run.table.set(batch_keys[i], req.id, scores.scores[i]);
            }
            continue;
        }
        const auto &name = *req.baseline;
        const auto scores = parallel_map(
            keys.size(),
            [&](std::size_t i) {
                const auto it = instances.find(keys[i]);
                if (it == instances.end())
                    throw Error(ErrorKind::UnknownInstance, "no dataset record (hypothesis/references)");
                const auto &inst = it->second;
                if (!inst.references || inst.references->empty())
                    throw Error(ErrorKind::EmptyReference, "instance has no references");
                if (name == "bleu") return baselines::bleu(inst.hypothesis, *inst.references).score;
                if (name == "chrf") return baselines::chrf(inst.hypothesis, *inst.references).score;
                const auto variant = name == "rouge1"   ? baselines::RougeVariant::r1
                                     : name == "rouge2" ? baselines::RougeVariant::r2
                                                        : baselines::RougeVariant::rl;
                return baselines::rouge(inst.hypothesis, *inst.references, variant).score;
            },
            threads);
        for (std::size_t i = 0; i < keys.size(); ++i) {
            if (scores.errors[i]) run.failures.emplace_back(keys[i], req.id + ": " + scores.errors[i]->what());
            else run.table.set(keys[i], req.id, scores.scores[i]);
        }
    }
    std::stable_sort(run.failures.begin(), run.failures.end(),
                     [](const auto &a, const auto &b) { return a.first < b.first; });
    return run;
}

std::vector<double> parse_grid(const std::string &text) {
    auto num = [&](const std::string &s) {
        try {
            std::size_t pos = 0;
            const double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception &) {
            throw Error(ErrorKind::Config, "bad grid value '" + s + "' in '" + text + "'");
        }
    };
    auto round9 = [](double v) { return std::round(v * 1e9) / 1e9; };
    std::vector<double> grid;
    if (text.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(text);
        std::string p;
        while (std::getline(ss, p, ':')) parts.push_back(p);
        if (parts.size() != 3) throw Error(ErrorKind::Config, "grid range must be start:stop:step");
        const double start = num(parts[0]), stop = num(parts[1]), step = num(parts[2]);
        if (!(step > 0.0) || stop < start) throw Error(ErrorKind::Config, "grid range needs step > 0 and stop >= start");
        const auto count = static_cast<long>(std::floor((stop - start) / step + 1e-9));
        for (long i = 0; i <= count; ++i) grid.push_back(round9(start + static_cast<double>(i) * step));
    } else {
        std::stringstream ss(text);
        std::string p;
        while (std::getline(ss, p, ','))
            if (!p.empty()) grid.push_back(round9(num(p)));
    }
    if (grid.empty()) throw Error(ErrorKind::Config, "empty grid");
    for (double g : grid)
        if (g < 0.0 || g > 1.0) throw Error(ErrorKind::Config, "grid values must lie in [0,1]");
    return grid;
}

std::vector<int> descending_ranks(const std::vector<double> &scores) {
    std::vector<int> ranks(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        int better = 0;
        for (double s : scores)
            if (s > scores[i]) ++better;
        ranks[i] = better + 1;
    }
    return ranks;
}

namespace {

struct Options {
    std::vector<std::string> manifests;
    std::vector<std::string> scorers;
    std::vector<std::string> probs;
    std::vector<std::string> score_files;
    std::string provider;
    std::string endpoint;
    std::string out;
    int threads = 0;
    std::string severity_weights;
    std::string tie_policy = "exclude_human_ties";
    std::string grouping = "within_segment";
    std::string pooling = "pooled";
    std::string correlation = "pearson";
    std::string unfairness = "signed";
    std::string ls_scorer;
    std::string sweep_grid = "0:1:0.05";
    std::string sweep_target = "contrast";
    std::string weighting = "mean";
    std::string base = "10";
    double prob_floor = 1e-10;
    std::string instance;
    std::string dimension;
    double gamma = 0.1;
    std::size_t batch_size = 16;
    std::size_t warmup = 2;
    std::size_t passes = 5;
    std::size_t samples = 4096;
    std::size_t length = 64;
    bool end_to_end = false;
    std::string expert_model = "expert";
    std::string amateur_model = "amateur";
    double expert_temperature = 0.5;
    double amateur_temperature = 1.5;
    int top_k_capture = 0;
    std::string cache_dir;
    std::uint64_t mock_seed = 7;
    double roughness = 0.3;
    int max_in_flight = 4;
    int timeout_ms = 30000;
    int retries = 3;
};

struct Loaded {
    std::vector<EvaluationInstance> instances;
    std::map<InstanceKey, EvaluationInstance> by_key;
    std::vector<DatasetSpec> datasets;
    std::vector<DatasetManifest> manifests;
    std::map<std::string, long> skipped;
    std::vector<std::string> warnings;
};

Loaded load_manifests(const Options &o) {
    Loaded l;
    const auto weights = o.severity_weights.empty() ? SeverityWeights{} : SeverityWeights::parse(o.severity_weights);
    for (const auto &path : o.manifests) {
        auto m = load_manifest(path);
        auto res = load_dataset(m, weights);
        l.skipped[m.dataset_id] += res.skipped;
        l.warnings.insert(l.warnings.end(), res.warnings.begin(), res.warnings.end());
        l.datasets.push_back({m.dataset_id, m.group.empty() ? m.dataset_id : m.group, m.dimensions});
        for (auto &inst : res.instances) {
            if (!l.by_key.emplace(inst.key, inst).second)
                throw Error(ErrorKind::DuplicateRecord, "instance " + inst.key.str() + " appears in two manifests");
            l.instances.push_back(std::move(inst));
        }
        l.manifests.push_back(std::move(m));
    }
    return l;
}

struct PairSource {
    std::map<InstanceKey, AlignedPair> pairs;
    std::map<InstanceKey, TokenProbSequence> experts;
    std::map<InstanceKey, std::string> problems;
};

PairSource load_pairs(const Options &o) {
    PairSource src;
    std::vector<fs::path> paths(o.probs.begin(), o.probs.end());
    auto load = load_tokenprobs(paths, false);
    src.pairs = std::move(load.pairs);
    src.experts = std::move(load.experts);
    for (auto &[k, e] : load.failures) src.problems.emplace(k, e.what());
    return src;
}

ProviderConfig provider_config(const Options &o, Role role) {
    ProviderConfig c;
    if (o.provider == "mock") c.kind = ProviderKind::mock;
    else if (o.provider == "http") c.kind = ProviderKind::http;
    else if (o.provider == "file") c.kind = ProviderKind::file;
    else throw Error(ErrorKind::Config, "provider must be mock, http or file");
    if (c.kind == ProviderKind::http) {
        if (o.endpoint.empty()) throw Error(ErrorKind::Config, "--endpoint is required for the http provider");
        c.endpoint = o.endpoint;
    }
    c.role = role;
    c.model_id = role == Role::expert ? o.expert_model : o.amateur_model;
    c.temperature = role == Role::expert ? o.expert_temperature : o.amateur_temperature;
    if (o.top_k_capture > 0 && role == Role::expert) c.top_k_capture = o.top_k_capture;
    c.cache_dir = o.cache_dir;
    c.files.assign(o.probs.begin(), o.probs.end());
    c.mock_seed = o.mock_seed;
    c.mock_roughness = o.roughness;
    c.max_in_flight = o.max_in_flight;
    c.timeout = std::chrono::milliseconds(o.timeout_ms);
    c.max_retries = o.retries;
    validate(c);
    return c;
}

std::vector<PromptTemplate> prompts_for(const Loaded &l) {
    std::map<std::string, PromptTemplate> by_dataset;
    for (const auto &m : l.manifests)
        by_dataset[m.dataset_id] = m.task == Task::translation ? translation_prompt(language_name(m.language_pair->second))
                                                               : summarization_prompt();
    std::vector<PromptTemplate> out;
    for (const auto &inst : l.instances) out.push_back(by_dataset.at(inst.key.dataset_id));
    return out;
}

/// Token probabilities from --probs, or fetched from --provider for every loaded instance.
PairSource acquire_pairs(const Options &o, const Loaded &l) {
    if (o.provider.empty() || o.provider == "file") return load_pairs(o);
    PairSource src;
    const auto prompts = prompts_for(l);
    std::vector<TokenProbRecord> records;
    for (const auto role : {Role::expert, Role::amateur}) {
        auto provider = make_provider(provider_config(o, role));
        auto got = fetch_all(*provider, l.instances, prompts, o.max_in_flight);
        records.insert(records.end(), std::make_move_iterator(got.begin()), std::make_move_iterator(got.end()));
    }
    std::map<InstanceKey, std::pair<std::optional<TokenProbSequence>, std::optional<TokenProbSequence>>> slots;
    for (auto &r : records) {
        auto &slot = slots[r.key];
        (r.sequence.role == Role::expert ? slot.first : slot.second) = std::move(r.sequence);
    }
    for (auto &[k, s] : slots) {
        src.experts.emplace(k, *s.first);
        try {
            src.pairs.emplace(k, validate_alignment(std::move(*s.first), std::move(*s.second), k));
        } catch (const Error &e) {
            src.problems.emplace(k, e.what());
        }
    }
    return src;
}

fs::path out_dir(const Options &o) {
    if (o.out.empty()) throw Error(ErrorKind::Config, "--out is required");
    fs::path dir = o.out;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw Error(ErrorKind::Config, "output directory not writable: " + o.out);
    return dir;
}

void write_metadata(const fs::path &dir, const std::string &command, const CLI::App &cmd) {
    const auto now = std::chrono::system_clock::now();
    const auto t = std::chrono::system_clock::to_time_t(now);
    std::ostringstream ts;
    ts << std::put_time(std::gmtime(&t), "%Y-%m-%dT%H:%M:%SZ");
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    for (const auto *opt : cmd.get_options()) {
        const auto name = opt->get_single_name();
        if (name.empty() || name == "help") continue;
        nlohmann::ordered_json entry;
        if (opt->count() > 0) {
            const auto &r = opt->results();
            if (opt->get_items_expected_max() <= 1 && r.size() == 1) entry["value"] = r[0];
            else entry["value"] = r;
            entry["source"] = "flag_or_config";
        } else {
            entry["value"] = opt->get_default_str();
            entry["source"] = "default";
        }
        config[name] = entry;
    }
    nlohmann::ordered_json meta;
    meta["schema_version"] = kSchemaVersion;
    meta["command"] = command;
    meta["created_at"] = ts.str();
    meta["threads_available"] = default_threads();
    meta["config"] = config;
    write_file_atomic(dir / "run_metadata.json", meta.dump(2) + "\n");
}

std::vector<InstanceKey> keys_to_score(const Loaded &l, const PairSource &src) {
    std::set<InstanceKey> keys;
    if (!l.instances.empty()) {
        for (const auto &inst : l.instances) keys.insert(inst.key);
    } else {
        for (const auto &[k, v] : src.pairs) keys.insert(k);
        for (const auto &[k, v] : src.problems) keys.insert(k);
    }
    return {keys.begin(), keys.end()};
}

std::string score_table_text(const ScoreTable &table) {
    const auto ids = table.scorer_ids();
    std::set<InstanceKey> keys;
    for (const auto &[k, v] : table.entries()) keys.insert(k.first);
    std::ostringstream out;
    out << "instance";
    for (const auto &id : ids) out << '\t' << id;
    out << '\n';
    char buf[64];
    for (const auto &k : keys) {
        out << k.str();
        for (const auto &id : ids) {
            const auto v = table.get(k, id);
            if (v) std::snprintf(buf, sizeof buf, "%.6f", *v);
            out << '\t' << (v ? buf : "n/a");
        }
        out << '\n';
    }
    return out.str();
}

std::string failures_jsonl(const std::vector<std::pair<InstanceKey, std::string>> &failures) {
    std::string body;
    for (const auto &[k, msg] : failures) {
        nlohmann::ordered_json j;
        j["schema_version"] = kSchemaVersion;
        j["dataset_id"] = k.dataset_id;
        j["segment_id"] = k.segment_id;
        j["system_id"] = k.system_id;
        // messages read "<scorer>: <Kind>: <detail>"
        const auto a = msg.find(": ");
        const auto b = a == std::string::npos ? a : msg.find(": ", a + 2);
        j["scorer_id"] = msg.substr(0, a);
        j["kind"] = b == std::string::npos ? "" : msg.substr(a + 2, b - a - 2);
        j["error"] = msg;
        body += j.dump() + "\n";
    }
    return body;
}

MetaConfig meta_config(const Options &o) {
    MetaConfig c;
    c.method = parse_correlation_method(o.correlation);
    c.pooling = parse_pooling(o.pooling);
    c.grouping = stats::parse_grouping(o.grouping);
    c.tie_policy = stats::parse_tie_policy(o.tie_policy);
    if (o.unfairness == "signed") c.unfairness = stats::UnfairnessMode::signed_difference;
    else if (o.unfairness == "absolute") c.unfairness = stats::UnfairnessMode::absolute_difference;
    else throw Error(ErrorKind::Config, "--unfairness must be signed or absolute");
    c.pairwise_dimension = o.dimension;
    c.threads = o.threads;
    return c;
}

std::vector<MetricRequest> metric_requests(const Options &o) {
    std::vector<MetricRequest> reqs;
    std::set<std::string> ids;
    for (const auto &s : o.scorers) {
        reqs.push_back(parse_metric(s));
        if (!ids.insert(reqs.back().id).second)
            throw Error(ErrorKind::Config, "two scorers share the id '" + reqs.back().id + "'");
    }
    return reqs;
}

ScorerSpec likelihood_spec() {
    ScorerSpec s;
    s.kind = ScorerKind::single;
    s.log_base = LogBase::natural;
    s.weighting = Weighting::mean;
    return s;
}

// ---------------------------------------------------------------- commands

int cmd_score(const Options &o, const CLI::App &app, std::ostream &out) {
    const auto dir = out_dir(o);
    const auto reqs = metric_requests(o);
    if (reqs.empty()) throw Error(ErrorKind::Config, "at least one --scorer is required");
    const auto loaded = load_manifests(o);
    const bool needs_probs = std::any_of(reqs.begin(), reqs.end(), [](const auto &r) { return r.spec.has_value(); });
    PairSource src;
    if (needs_probs) src = acquire_pairs(o, loaded);
    const auto keys = keys_to_score(loaded, src);
    if (keys.empty()) throw Error(ErrorKind::Config, "nothing to score: pass --manifest and/or --probs");
    const auto run = score_all(reqs, keys, src.pairs, loaded.by_key, src.problems, o.threads);

    std::ostringstream structured;
    write_score_table(structured, run.table);
    write_file_atomic(dir / "scores.jsonl", structured.str());
    write_file_atomic(dir / "scores.txt", score_table_text(run.table));
    write_file_atomic(dir / "failures.jsonl", failures_jsonl(run.failures));
    write_metadata(dir, "score", app);
    out << "scored " << run.table.size() << " cell(s) into " << (dir / "scores.jsonl").string() << '\n';
    if (!run.failures.empty()) {
        for (const auto &[k, msg] : run.failures) out << "error: " << k.str() << ": " << msg << '\n';
        return 1;
    }
    return 0;
}

struct EvalInputs {
    Loaded loaded;
    ScoreTable table;
    std::map<InstanceKey, double> likelihoods;
    std::vector<std::pair<InstanceKey, std::string>> failures;
};

EvalInputs evaluation_inputs(const Options &o) {
    EvalInputs in;
    if (o.manifests.empty()) throw Error(ErrorKind::Config, "--manifest is required (human scores)");
    in.loaded = load_manifests(o);
    for (const auto &f : o.score_files) in.table.merge(read_score_file(f));
    const auto reqs = metric_requests(o);
    const bool needs_probs = std::any_of(reqs.begin(), reqs.end(), [](const auto &r) { return r.spec.has_value(); });
    PairSource src;
    if (needs_probs || !o.probs.empty() || (!o.provider.empty() && o.provider != "file"))
        src = acquire_pairs(o, in.loaded);
    if (!reqs.empty()) {
        auto run = score_all(reqs, keys_to_score(in.loaded, src), src.pairs, in.loaded.by_key, src.problems, o.threads);
        in.table.merge(run.table);
        in.failures = std::move(run.failures);
    }
    if (!o.ls_scorer.empty()) {
        for (const auto &[k, v] : in.table.entries())
            if (k.second == o.ls_scorer) in.likelihoods[k.first] = v;
    } else {
        const auto spec = likelihood_spec();
        for (const auto &[k, seq] : src.experts) in.likelihoods[k] = single_score(seq, spec);
    }
    if (in.table.empty()) throw Error(ErrorKind::Config, "no scores: pass --scores files and/or --scorer with --probs");
    return in;
}

int cmd_evaluate(const Options &o, const CLI::App &app, std::ostream &out, bool bias_only) {
    const auto dir = out_dir(o);
    auto in = evaluation_inputs(o);
    auto config = meta_config(o);
    if (bias_only) config.compute_pairwise = false;
    auto report = evaluate(in.loaded.instances, in.table, in.likelihoods, config, in.loaded.datasets);
    report.skipped = in.loaded.skipped;
    report.warnings.insert(report.warnings.begin(), in.loaded.warnings.begin(), in.loaded.warnings.end());
    if (bias_only) {
        if (in.likelihoods.empty())
            throw Error(ErrorKind::Config, "bias needs likelihoods: pass --probs or --ls-scorer");
        report.correlations.clear();
        report.averages.clear();
    }
    const std::string stem = bias_only ? "bias" : "report";
    write_file_atomic(dir / (stem + ".jsonl"), report_jsonl(report));
    const auto text = report_text(report);
    write_file_atomic(dir / (stem + ".txt"), text);
    if (!in.failures.empty()) write_file_atomic(dir / "failures.jsonl", failures_jsonl(in.failures));
    write_metadata(dir, bias_only ? "bias" : "evaluate", app);
    out << text;
    return in.failures.empty() ? 0 : 1;
}

int cmd_sweep(const Options &o, const CLI::App &app, std::ostream &out) {
    const auto dir = out_dir(o);
    if (o.manifests.empty()) throw Error(ErrorKind::Config, "--manifest is required (human scores)");
    const auto grid = parse_grid(o.sweep_grid);
    ScorerKind kind;
    if (o.sweep_target == "contrast") kind = ScorerKind::contrast;
    else if (o.sweep_target == "ensemble_weighted") kind = ScorerKind::ensemble_weighted;
    else throw Error(ErrorKind::Config, "--sweep-target must be contrast or ensemble_weighted");
    const auto loaded = load_manifests(o);
    const auto src = acquire_pairs(o, loaded);
    const auto keys = keys_to_score(loaded, src);
    auto config = meta_config(o);
    config.compute_pairwise = false;
    config.compute_bias = false;

    std::ostringstream jsonl, text;
    text << "gamma     AVG       cells\n";
    std::optional<double> best_avg;
    double best_gamma = 0.0;
    long failures = 0;
    for (const double g : grid) {
        MetricRequest req;
        ScorerSpec spec;
        spec.kind = kind;
        spec.gamma = g;
        spec.weighting = o.weighting == "sum" ? Weighting::sum : Weighting::mean;
        spec.log_base = o.base == "e" ? LogBase::natural : LogBase::ten;
        spec.prob_floor = o.prob_floor;
        validate(spec);
        req.spec = spec;
        req.id = spec.scorer_id();
        const auto run = score_all({req}, keys, src.pairs, loaded.by_key, src.problems, o.threads);
        failures += static_cast<long>(run.failures.size());
        const auto report = evaluate(loaded.instances, run.table, {}, config, loaded.datasets);
        double sum = 0.0;
        long cells = 0;
        for (const auto &c : report.correlations) {
            nlohmann::ordered_json j;
            j["schema_version"] = kSchemaVersion;
            j["record"] = "sweep_point";
            j["target"] = o.sweep_target;
            j["gamma"] = g;
            j["dataset_id"] = c.dataset_id;
            j["dimension"] = c.dimension;
            j["coefficient"] = c.coefficient ? nlohmann::ordered_json(*c.coefficient) : nlohmann::ordered_json(nullptr);
            j["n"] = c.n;
            jsonl << j.dump() << '\n';
            if (c.coefficient) {
                sum += *c.coefficient;
                ++cells;
            }
        }
        std::optional<double> avg;
        if (cells > 0) avg = sum / static_cast<double>(cells);
        nlohmann::ordered_json j;
        j["schema_version"] = kSchemaVersion;
        j["record"] = "sweep_average";
        j["target"] = o.sweep_target;
        j["gamma"] = g;
        j["average"] = avg ? nlohmann::ordered_json(*avg) : nlohmann::ordered_json(nullptr);
        j["cells"] = cells;
        jsonl << j.dump() << '\n';
        char buf[128];
        std::snprintf(buf, sizeof buf, "%-8.4g  %-8s  %ld\n", g, avg ? std::to_string(*avg).substr(0, 8).c_str() : "n/a",
                      cells);
        text << buf;
        if (avg && (!best_avg || *avg > *best_avg)) {
            best_avg = avg;
            best_gamma = g;
        }
    }
    nlohmann::ordered_json best;
    best["schema_version"] = kSchemaVersion;
    best["record"] = "sweep_argmax";
    best["target"] = o.sweep_target;
    best["gamma"] = best_avg ? nlohmann::ordered_json(best_gamma) : nlohmann::ordered_json(nullptr);
    best["average"] = best_avg ? nlohmann::ordered_json(*best_avg) : nlohmann::ordered_json(nullptr);
    jsonl << best.dump() << '\n';
    if (best_avg) text << "argmax gamma = " << best_gamma << '\n';
    write_file_atomic(dir / "sweep.jsonl", jsonl.str());
    write_file_atomic(dir / "sweep.txt", text.str());
    write_metadata(dir, "sweep", app);
    out << text.str();
    return failures == 0 ? 0 : 1;
}

int cmd_case_study(const Options &o, const CLI::App &app, std::ostream &out) {
    if (o.instance.empty()) throw Error(ErrorKind::Config, "--instance dataset/segment/system is required");
    const auto target = parse_instance_key(o.instance);
    const auto loaded = load_manifests(o);
    const auto src = load_pairs(o);
    if (!src.pairs.count(target)) {
        const auto p = src.problems.find(target);
        throw Error(ErrorKind::UnknownInstance,
                    o.instance + (p != src.problems.end() ? ": " + p->second : " not found in the token files"));
    }
    std::vector<const AlignedPair *> hyps;
    for (const auto &[k, pair] : src.pairs)
        if (k.dataset_id == target.dataset_id && k.segment_id == target.segment_id) hyps.push_back(&pair);

    ScorerSpec single;
    single.kind = ScorerKind::single;
    single.log_base = o.base == "e" ? LogBase::natural : LogBase::ten;
    single.prob_floor = o.prob_floor;
    ScorerSpec amateur = single;
    amateur.role = Role::amateur;
    ScorerSpec contrast = single;
    contrast.kind = ScorerKind::contrast;
    contrast.gamma = o.gamma;
    validate(contrast);

    std::vector<double> se, sa, sc, human;
    std::vector<TokenScoreBreakdown> rows;
    bool have_human = true;
    for (const auto *p : hyps) {
        se.push_back(single_score(p->expert(), single));
        sa.push_back(single_score(p->amateur(), amateur));
        rows.push_back(contrast_score(*p, contrast));
        sc.push_back(rows.back().total);
        const auto inst = loaded.by_key.find(p->key());
        std::optional<double> h;
        if (inst != loaded.by_key.end()) {
            const auto &hs = inst->second.human_scores;
            const auto d = o.dimension.empty() ? hs.begin() : hs.find(o.dimension);
            if (d != hs.end()) h = d->second;
        }
        if (h) human.push_back(*h);
        else have_human = false;
    }
    const auto re = descending_ranks(se), ra = descending_ranks(sa), rc = descending_ranks(sc);
    std::vector<int> rh;
    if (have_human) rh = descending_ranks(human);

    std::ostringstream text, jsonl;
    char buf[64];
    auto cell = [&](double v) {
        std::snprintf(buf, sizeof buf, "%10.4g", v);
        return std::string(buf);
    };
    text << "segment " << target.dataset_id << "/" << target.segment_id << "  (gamma=" << o.gamma << ", mean log"
         << (single.log_base == LogBase::ten ? "10" : "") << ")\n";
    for (std::size_t h = 0; h < hyps.size(); ++h) {
        const auto &p = *hyps[h];
        text << "\nsystem " << p.key().system_id;
        if (have_human) text << "  (human rank " << rh[h] << ")";
        text << "\n  " << std::setw(9) << "tokens:";
        for (const auto &t : p.expert().tokens) text << ' ' << std::setw(10) << t.text.substr(0, 10);
        text << "  " << std::setw(9) << "meanlog" << "  rank\n";
        auto row = [&](const char *label, auto value_at, double mean, int rank) {
            text << "  " << std::setw(9) << label;
            for (std::size_t t = 0; t < p.size(); ++t) text << ' ' << cell(value_at(t));
            std::snprintf(buf, sizeof buf, "  %9.3f  %4d\n", mean, rank);
            text << buf;
        };
        row("expert:", [&](std::size_t t) { return p.expert().tokens[t].prob; }, se[h], re[h]);
        row("amateur:", [&](std::size_t t) { return p.amateur().tokens[t].prob; }, sa[h], ra[h]);
        row("contrast:", [&](std::size_t t) { return rows[h].per_token[t].combined_prob; }, sc[h], rc[h]);

        for (std::size_t t = 0; t < p.size(); ++t) {
            nlohmann::ordered_json j;
            j["schema_version"] = kSchemaVersion;
            j["record"] = "case_study_token";
            j["system_id"] = p.key().system_id;
            j["position"] = t;
            j["text"] = p.expert().tokens[t].text;
            j["expert"] = p.expert().tokens[t].prob;
            j["amateur"] = p.amateur().tokens[t].prob;
            j["contrast"] = rows[h].per_token[t].combined_prob;
            jsonl << j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
        }
        nlohmann::ordered_json j;
        j["schema_version"] = kSchemaVersion;
        j["record"] = "case_study_summary";
        j["dataset_id"] = p.key().dataset_id;
        j["segment_id"] = p.key().segment_id;
        j["system_id"] = p.key().system_id;
        j["gamma"] = o.gamma;
        j["expert_mean_log"] = se[h];
        j["amateur_mean_log"] = sa[h];
        j["contrast_mean_log"] = sc[h];
        j["expert_rank"] = re[h];
        j["amateur_rank"] = ra[h];
        j["contrast_rank"] = rc[h];
        j["human_rank"] = have_human ? nlohmann::ordered_json(rh[h]) : nlohmann::ordered_json(nullptr);
        jsonl << j.dump() << '\n';
    }
    if (!o.out.empty()) {
        const auto dir = out_dir(o);
        write_file_atomic(dir / "case_study.jsonl", jsonl.str());
        write_file_atomic(dir / "case_study.txt", text.str());
        write_metadata(dir, "case-study", app);
    }
    out << text.str();
    return 0;
}

int cmd_bench(const Options &o, const CLI::App &app, std::ostream &out) {
    std::vector<AlignedPair> workload;
    if (!o.probs.empty()) {
        auto src = load_pairs(o);
        for (auto &[k, p] : src.pairs) workload.push_back(p);
    } else {
        for (std::size_t i = 0; i < o.samples; ++i)
            workload.push_back(mock_generate(o.mock_seed + i, o.length, o.roughness, o.top_k_capture));
    }
    std::vector<ScorerSpec> specs;
    for (const auto &s : o.scorers) {
        auto req = parse_metric(s);
        if (!req.spec) throw Error(ErrorKind::Config, "bench only times probability scorers");
        specs.push_back(*req.spec);
    }
    if (specs.empty()) specs.push_back(parse_scorer_spec("contrast:gamma=0.1"));
    BenchOptions bo;
    bo.batch_size = o.batch_size;
    bo.warmup_batches = o.warmup;
    bo.passes = o.passes;
    bo.threads = o.threads;
    bo.end_to_end = o.end_to_end;
    const auto results = run_bench(workload, specs, bo);
    if (!o.out.empty()) {
        const auto dir = out_dir(o);
        write_file_atomic(dir / "bench.jsonl", bench_jsonl(results));
        write_file_atomic(dir / "bench.txt", bench_text(results));
        write_metadata(dir, "bench", app);
    }
    out << bench_text(results);
    return 0;
}

int cmd_fetch(const Options &o, const CLI::App &app, std::ostream &out) {
    if (o.manifests.empty()) throw Error(ErrorKind::Config, "--manifest is required");
    if (o.provider.empty() || o.provider == "file") throw Error(ErrorKind::Config, "--provider must be mock or http");
    const auto dir = out_dir(o);
    const auto loaded = load_manifests(o);
    const auto prompts = prompts_for(loaded);
    std::vector<TokenProbRecord> records;
    for (const auto role : {Role::expert, Role::amateur}) {
        auto provider = make_provider(provider_config(o, role));
        auto got = fetch_all(*provider, loaded.instances, prompts, o.max_in_flight);
        records.insert(records.end(), std::make_move_iterator(got.begin()), std::make_move_iterator(got.end()));
    }
    write_records(dir / "probs.jsonl", records);
    write_metadata(dir, "fetch", app);
    out << "wrote " << records.size() << " record(s) to " << (dir / "probs.jsonl").string() << '\n';
    return 0;
}

void add_data_options(CLI::App &cmd, Options &o) {
    cmd.add_option("--manifest", o.manifests, "Dataset manifest (repeatable)");
    cmd.add_option("--probs", o.probs, "Token-probability interchange file (repeatable)");
    cmd.add_option("--provider", o.provider, "Token probability source: file, mock or http");
    cmd.add_option("--endpoint", o.endpoint, "HTTP scoring endpoint (http provider)");
    cmd.add_option("--out", o.out, "Output directory");
    cmd.add_option("--threads", o.threads, "Worker threads (0 = OpenMP default)");
    cmd.add_option("--severity-weights", o.severity_weights, "MQM weights, e.g. major=-5,minor=-1,critical=-25");
}

void add_provider_options(CLI::App &cmd, Options &o) {
    cmd.add_option("--expert-model", o.expert_model, "Expert model id");
    cmd.add_option("--amateur-model", o.amateur_model, "Amateur model id");
    cmd.add_option("--expert-temperature", o.expert_temperature, "Expert softmax temperature");
    cmd.add_option("--amateur-temperature", o.amateur_temperature, "Amateur softmax temperature");
    cmd.add_option("--top-k-capture", o.top_k_capture, "Capture expert top-k ids per position (cd_score)");
    cmd.add_option("--cache-dir", o.cache_dir, "HTTP response cache directory");
    cmd.add_option("--mock-seed", o.mock_seed, "Mock provider seed");
    cmd.add_option("--roughness", o.roughness, "Mock expert/amateur divergence");
    cmd.add_option("--max-in-flight", o.max_in_flight, "Concurrent provider requests");
    cmd.add_option("--timeout-ms", o.timeout_ms, "HTTP timeout per request");
    cmd.add_option("--retries", o.retries, "HTTP retries on transient failures");
}

void add_meta_options(CLI::App &cmd, Options &o) {
    cmd.add_option("--tie-policy", o.tie_policy, "exclude_human_ties or tie_calibrated");
    cmd.add_option("--grouping", o.grouping, "Pairwise grouping: within_segment or global");
    cmd.add_option("--pooling", o.pooling, "Correlation pooling: pooled or per_system");
    cmd.add_option("--correlation", o.correlation, "pearson or spearman");
    cmd.add_option("--unfairness", o.unfairness, "Bias US definition: signed or absolute");
    cmd.add_option("--dimension", o.dimension, "Dimension for pairwise accuracy / case-study human rank");
}

} // namespace

int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
    Options o;
    CLI::App app{"Contrastive expert/amateur scoring and meta-evaluation", "contrastscore"};
    app.set_config("--config", "", "TOML/INI config file (flags override it)");
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);

    auto *score = app.add_subcommand("score", "Score instances with one or more scorers");
    add_data_options(*score, o);
    add_provider_options(*score, o);
    score->add_option("--scorer", o.scorers, "Scorer, e.g. contrast:gamma=0.1:weighting=mean:base=10 (repeatable)");

    auto *evaluate_cmd = app.add_subcommand("evaluate", "Correlation, pairwise accuracy and bias against human scores");
    add_data_options(*evaluate_cmd, o);
    add_provider_options(*evaluate_cmd, o);
    add_meta_options(*evaluate_cmd, o);
    evaluate_cmd->add_option("--scorer", o.scorers, "Scorer to compute before evaluating (repeatable)");
    evaluate_cmd->add_option("--scores", o.score_files, "Score file, ours or external (repeatable)");
    evaluate_cmd->add_option("--ls-scorer", o.ls_scorer, "Score column to use as the likelihood score");

    auto *bias = app.add_subcommand("bias", "Likelihood BiasScore only");
    add_data_options(*bias, o);
    add_provider_options(*bias, o);
    add_meta_options(*bias, o);
    bias->add_option("--scorer", o.scorers, "Scorer (repeatable)");
    bias->add_option("--scores", o.score_files, "Score file (repeatable)");
    bias->add_option("--ls-scorer", o.ls_scorer, "Score column to use as the likelihood score");

    auto *sweep = app.add_subcommand("sweep", "Correlation as a function of gamma");
    add_data_options(*sweep, o);
    add_provider_options(*sweep, o);
    add_meta_options(*sweep, o);
    sweep->add_option("--sweep-grid", o.sweep_grid, "start:stop:step or comma list");
    sweep->add_option("--sweep-target", o.sweep_target, "contrast or ensemble_weighted");
    sweep->add_option("--weighting", o.weighting, "mean or sum");
    sweep->add_option("--base", o.base, "10 or e");
    sweep->add_option("--floor", o.prob_floor, "Probability floor");

    auto *case_study = app.add_subcommand("case-study", "Per-token expert/amateur/contrast table for one segment");
    add_data_options(*case_study, o);
    case_study->add_option("--instance", o.instance, "dataset/segment/system")->required();
    case_study->add_option("--gamma", o.gamma, "Contrast gamma");
    case_study->add_option("--base", o.base, "10 or e");
    case_study->add_option("--floor", o.prob_floor, "Probability floor");
    case_study->add_option("--dimension", o.dimension, "Human dimension used for the human rank");

    auto *bench = app.add_subcommand("bench", "Scoring throughput in samples per second");
    add_data_options(*bench, o);
    bench->add_option("--scorer", o.scorers, "Scorer to time (repeatable)");
    bench->add_option("--batch-size", o.batch_size, "Samples per batch");
    bench->add_option("--warmup", o.warmup, "Untimed warmup batches");
    bench->add_option("--passes", o.passes, "Timed passes (median reported)");
    bench->add_option("--samples", o.samples, "Mock workload size when no --probs");
    bench->add_option("--length", o.length, "Mock tokens per sample");
    bench->add_option("--mock-seed", o.mock_seed, "Mock workload seed");
    bench->add_option("--roughness", o.roughness, "Mock divergence");
    bench->add_option("--top-k-capture", o.top_k_capture, "Mock top-k sets (needed by cd_score)");
    bench->add_flag("--end-to-end", o.end_to_end, "Include interchange parsing in the timed region");

    auto *fetch_cmd = app.add_subcommand("fetch", "Write interchange files for a dataset via a provider");
    add_data_options(*fetch_cmd, o);
    add_provider_options(*fetch_cmd, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp &e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError &e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        if (*score) return cmd_score(o, *score, out);
        if (*evaluate_cmd) return cmd_evaluate(o, *evaluate_cmd, out, false);
        if (*bias) return cmd_evaluate(o, *bias, out, true);
        if (*sweep) return cmd_sweep(o, *sweep, out);
        if (*case_study) return cmd_case_study(o, *case_study, out);
        if (*bench) return cmd_bench(o, *bench, out);
        if (*fetch_cmd) return cmd_fetch(o, *fetch_cmd, out);
    } catch (const Error &e) {
        err << "error: " << e.what() << '\n';
        return e.is_config_error() ? 2 : 1;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

} // namespace contrastscore
