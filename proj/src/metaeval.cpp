#include "contrastscore/metaeval.hpp"

#include "contrastscore/error.hpp"
#include "contrastscore/interchange.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <set>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace contrastscore {

namespace {

struct CellOutcome {
    std::vector<std::string> warnings;
};

double correlate(CorrelationMethod method, std::span<const double> xs, std::span<const double> ys) {
    return method == CorrelationMethod::pearson ? stats::pearson(xs, ys) : stats::spearman(xs, ys);
}

std::string cell_name(const std::string &ds, const std::string &dim, const std::string &scorer) {
    return ds + "/" + dim + "/" + scorer;
}

/// Runs fn(i) for i in [0, n) across threads; each cell owns its output slot.
template <typename Fn> void for_cells(std::size_t n, int threads, Fn &&fn) {
    const auto count = static_cast<std::int64_t>(n);
#ifdef _OPENMP
    const int nthreads = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(nthreads)
#else
    (void)threads;
#endif
    for (std::int64_t i = 0; i < count; ++i) fn(static_cast<std::size_t>(i));
}

CorrelationResult correlation_cell(const std::vector<const EvaluationInstance *> &rows, const ScoreTable &scores,
                                   const std::string &ds, const std::string &dim, const std::string &scorer,
                                   const MetaConfig &config, CellOutcome &outcome) {
    CorrelationResult r{ds, dim, scorer, std::nullopt, 0, 0};
    std::vector<double> xs, ys;
    std::vector<std::string> systems;
    for (const auto *inst : rows) {
        const auto metric = scores.get(inst->key, scorer);
        const auto human = inst->human_scores.find(dim);
        if (!metric || human == inst->human_scores.end()) {
            ++r.dropped;
            continue;
        }
        xs.push_back(*metric);
        ys.push_back(human->second);
        systems.push_back(inst->key.system_id);
    }
    r.n = static_cast<long>(xs.size());
    const auto name = cell_name(ds, dim, scorer);
    if (r.n < 2) {
        outcome.warnings.push_back(name + ": fewer than 2 paired observations");
        return r;
    }
    if (config.pooling == CorrelationPooling::pooled) {
        try {
            r.coefficient = correlate(config.method, xs, ys);
        } catch (const Error &e) {
            outcome.warnings.push_back(name + ": " + e.what());
        }
        return r;
    }
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>, bool (*)(std::string_view, std::string_view)>
        by_system(natural_less);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        by_system[systems[i]].first.push_back(xs[i]);
        by_system[systems[i]].second.push_back(ys[i]);
    }
    double sum = 0.0;
    long defined = 0;
    for (const auto &[sys, v] : by_system) {
        if (v.first.size() < 2) continue;
        try {
            sum += correlate(config.method, v.first, v.second);
            ++defined;
        } catch (const Error &e) {
            outcome.warnings.push_back(name + " system " + sys + ": " + e.what());
        }
    }
    if (defined > 0) r.coefficient = sum / static_cast<double>(defined);
    else outcome.warnings.push_back(name + ": no system has a defined correlation");
    return r;
}

PairwiseResult pairwise_cell(const std::vector<const EvaluationInstance *> &rows, const ScoreTable &scores,
                             const std::string &ds, const std::string &dim, const std::string &scorer,
                             const MetaConfig &config, CellOutcome &outcome) {
    PairwiseResult r{ds, dim, scorer, std::nullopt, 0, 0, 0, 0.0};
    std::vector<stats::PairItem> items;
    for (const auto *inst : rows) {
        const auto metric = scores.get(inst->key, scorer);
        const auto human = inst->human_scores.find(dim);
        if (!metric || human == inst->human_scores.end()) continue;
        items.push_back({inst->key.segment_id, inst->key.system_id, *metric, human->second});
    }
    try {
        const auto c = stats::pairwise_accuracy(items, config.grouping, config.tie_policy);
        r.accuracy = c.accuracy;
        r.pairs_total = c.pairs_total;
        r.pairs_tied_human = c.pairs_tied_human;
        r.pairs_tied_metric = c.pairs_tied_metric;
        r.tie_epsilon = c.tie_epsilon;
    } catch (const Error &e) {
        outcome.warnings.push_back(cell_name(ds, dim, scorer) + " pairwise: " + e.what());
    }
    return r;
}

BiasResult bias_cell(const std::vector<const EvaluationInstance *> &rows, const ScoreTable &scores,
                     const std::map<InstanceKey, double> &likelihoods, const std::string &ds, const std::string &dim,
                     const std::string &scorer, const MetaConfig &config, CellOutcome &outcome) {
    BiasResult r{ds, dim, scorer, std::nullopt, 0, false};
    std::vector<double> ls, ms, hs;
    for (const auto *inst : rows) {
        const auto metric = scores.get(inst->key, scorer);
        const auto human = inst->human_scores.find(dim);
        const auto lik = likelihoods.find(inst->key);
        if (!metric || human == inst->human_scores.end() || lik == likelihoods.end()) continue;
        ls.push_back(lik->second);
        ms.push_back(*metric);
        hs.push_back(human->second);
    }
    r.n = static_cast<long>(ls.size());
    const auto name = cell_name(ds, dim, scorer);
    try {
        const auto b = stats::bias_score(ls, ms, hs, config.unfairness);
        r.bias = b.bias;
        r.degenerate = b.degenerate;
        if (b.degenerate) outcome.warnings.push_back(name + " bias: unfairness scores are constant");
    } catch (const Error &e) {
        outcome.warnings.push_back(name + " bias: " + e.what());
    }
    return r;
}

std::string fmt(const std::optional<double> &v, int precision = 3) {
    if (!v) return "n/a";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, *v);
    return buf;
}

nlohmann::ordered_json opt(const std::optional<double> &v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

} // namespace

MetaReport evaluate(const std::vector<EvaluationInstance> &instances, const ScoreTable &scores,
                    const std::map<InstanceKey, double> &likelihoods, const MetaConfig &config,
                    std::vector<DatasetSpec> datasets) {
    std::map<std::string, std::vector<const EvaluationInstance *>> rows_by_ds;
    for (const auto &inst : instances) rows_by_ds[inst.key.dataset_id].push_back(&inst);
    for (auto &[ds, rows] : rows_by_ds)
        std::sort(rows.begin(), rows.end(), [](const auto *a, const auto *b) { return a->key < b->key; });

    if (datasets.empty()) {
        for (const auto &[ds, rows] : rows_by_ds) {
            std::set<std::string> dims;
            for (const auto *r : rows)
                for (const auto &[d, v] : r->human_scores) dims.insert(d);
            datasets.push_back({ds, ds, {dims.begin(), dims.end()}});
        }
    }
    for (auto &d : datasets)
        if (d.group.empty()) d.group = d.dataset_id;

    const auto scorer_ids = scores.scorer_ids();
    static const std::vector<const EvaluationInstance *> kNoRows;
    auto rows_of = [&](const std::string &ds) -> const std::vector<const EvaluationInstance *> & {
        const auto it = rows_by_ds.find(ds);
        return it == rows_by_ds.end() ? kNoRows : it->second;
    };

    struct Cell {
        const DatasetSpec *ds;
        std::string dim;
        std::string scorer;
    };
    std::vector<Cell> corr_cells, pair_cells;
    for (const auto &d : datasets) {
        for (const auto &dim : d.dimensions)
            for (const auto &s : scorer_ids) corr_cells.push_back({&d, dim, s});
        if (config.compute_pairwise && !d.dimensions.empty()) {
            const auto &dim = config.pairwise_dimension.empty() ? d.dimensions.front() : config.pairwise_dimension;
            for (const auto &s : scorer_ids) pair_cells.push_back({&d, dim, s});
        }
    }
    const bool do_bias = config.compute_bias && !likelihoods.empty();

    MetaReport report;
    std::vector<CellOutcome> corr_out(corr_cells.size()), pair_out(pair_cells.size()), bias_out(corr_cells.size());
    report.correlations.resize(corr_cells.size());
    report.pairwise.resize(pair_cells.size());
    if (do_bias) report.bias.resize(corr_cells.size());

    for_cells(corr_cells.size(), config.threads, [&](std::size_t i) {
        const auto &c = corr_cells[i];
        const auto &rows = rows_of(c.ds->dataset_id);
        report.correlations[i] = correlation_cell(rows, scores, c.ds->dataset_id, c.dim, c.scorer, config, corr_out[i]);
        if (do_bias)
            report.bias[i] = bias_cell(rows, scores, likelihoods, c.ds->dataset_id, c.dim, c.scorer, config, bias_out[i]);
    });
    for_cells(pair_cells.size(), config.threads, [&](std::size_t i) {
        const auto &c = pair_cells[i];
        report.pairwise[i] =
            pairwise_cell(rows_of(c.ds->dataset_id), scores, c.ds->dataset_id, c.dim, c.scorer, config, pair_out[i]);
    });

    // Assembly below is single-threaded and in cell order.
    for (auto *outs : {&corr_out, &bias_out, &pair_out})
        for (const auto &o : *outs) report.warnings.insert(report.warnings.end(), o.warnings.begin(), o.warnings.end());

    for (const auto &d : datasets)
        for (const auto &s : scorer_ids) {
            AverageResult a{"dataset", d.dataset_id, s, std::nullopt, 0};
            double sum = 0.0;
            for (const auto &c : report.correlations)
                if (c.dataset_id == d.dataset_id && c.scorer_id == s && c.coefficient) {
                    sum += *c.coefficient;
                    ++a.cells;
                }
            if (a.cells > 0) a.average = sum / static_cast<double>(a.cells);
            report.averages.push_back(a);
        }
    std::map<std::string, std::vector<std::string>> groups;
    for (const auto &d : datasets) groups[d.group].push_back(d.dataset_id);
    for (const auto &[group, members] : groups) {
        if (members.size() < 2) continue;
        for (const auto &s : scorer_ids) {
            AverageResult a{"group", group, s, std::nullopt, 0};
            double sum = 0.0;
            for (const auto &c : report.correlations)
                if (c.scorer_id == s && c.coefficient &&
                    std::find(members.begin(), members.end(), c.dataset_id) != members.end()) {
                    sum += *c.coefficient;
                    ++a.cells;
                }
            if (a.cells > 0) a.average = sum / static_cast<double>(a.cells);
            report.averages.push_back(a);
        }
    }
    return report;
}

std::string report_jsonl(const MetaReport &report) {
    std::ostringstream out;
    auto line = [&](nlohmann::ordered_json j) { out << j.dump() << '\n'; };
    for (const auto &c : report.correlations) {
        nlohmann::ordered_json j;
        j["schema_version"] = kSchemaVersion;
        j["record"] = "correlation";
        j["dataset_id"] = c.dataset_id;
        j["dimension"] = c.dimension;
        j["scorer_id"] = c.scorer_id;
        j["coefficient"] = opt(c.coefficient);
        j["n"] = c.n;
        j["dropped"] = c.dropped;
        line(j);
    }
    for (const auto &a : report.averages) {
        nlohmann::ordered_json j;
        j["schema_version"] = kSchemaVersion;
        j["record"] = "average";
        j["scope"] = a.scope;
        j["name"] = a.name;
        j["scorer_id"] = a.scorer_id;
        j["average"] = opt(a.average);
        j["cells"] = a.cells;
        line(j);
    }
    for (const auto &p : report.pairwise) {
        nlohmann::ordered_json j;
        j["schema_version"] = kSchemaVersion;
        j["record"] = "pairwise";
        j["dataset_id"] = p.dataset_id;
        j["dimension"] = p.dimension;
        j["scorer_id"] = p.scorer_id;
        j["accuracy"] = opt(p.accuracy);
        j["pairs_total"] = p.pairs_total;
        j["pairs_tied_human"] = p.pairs_tied_human;
        j["pairs_tied_metric"] = p.pairs_tied_metric;
        j["tie_epsilon"] = p.tie_epsilon;
        line(j);
    }
    for (const auto &b : report.bias) {
        nlohmann::ordered_json j;
        j["schema_version"] = kSchemaVersion;
        j["record"] = "bias";
        j["dataset_id"] = b.dataset_id;
        j["dimension"] = b.dimension;
        j["scorer_id"] = b.scorer_id;
        j["bias"] = opt(b.bias);
        j["n"] = b.n;
        j["degenerate"] = b.degenerate;
        line(j);
    }
    for (const auto &[ds, n] : report.skipped) {
        nlohmann::ordered_json j;
        j["schema_version"] = kSchemaVersion;
        j["record"] = "skipped";
        j["dataset_id"] = ds;
        j["count"] = n;
        line(j);
    }
    for (const auto &w : report.warnings) {
        nlohmann::ordered_json j;
        j["schema_version"] = kSchemaVersion;
        j["record"] = "warning";
        j["message"] = w;
        line(j);
    }
    return out.str();
}

std::string report_text(const MetaReport &report) {
    std::ostringstream out;
    std::vector<std::string> datasets, scorers;
    for (const auto &c : report.correlations) {
        if (std::find(datasets.begin(), datasets.end(), c.dataset_id) == datasets.end())
            datasets.push_back(c.dataset_id);
        if (std::find(scorers.begin(), scorers.end(), c.scorer_id) == scorers.end()) scorers.push_back(c.scorer_id);
    }
    std::size_t width = 8;
    for (const auto &s : scorers) width = std::max(width, s.size());

    auto pad = [](std::string s, std::size_t w) {
        if (s.size() < w) s.append(w - s.size(), ' ');
        return s;
    };

    for (const auto &ds : datasets) {
        std::vector<std::string> dims;
        for (const auto &c : report.correlations)
            if (c.dataset_id == ds && std::find(dims.begin(), dims.end(), c.dimension) == dims.end())
                dims.push_back(c.dimension);
        out << "== correlation: " << ds << " ==\n" << pad("scorer", width);
        for (const auto &d : dims) out << "  " << pad(d, std::max<std::size_t>(8, d.size()));
        out << "  AVG\n";
        for (const auto &s : scorers) {
            out << pad(s, width);
            for (const auto &d : dims) {
                std::optional<double> v;
                for (const auto &c : report.correlations)
                    if (c.dataset_id == ds && c.dimension == d && c.scorer_id == s) v = c.coefficient;
                out << "  " << pad(fmt(v), std::max<std::size_t>(8, d.size()));
            }
            std::optional<double> avg;
            for (const auto &a : report.averages)
                if (a.scope == "dataset" && a.name == ds && a.scorer_id == s) avg = a.average;
            out << "  " << fmt(avg) << '\n';
        }
        out << '\n';
    }
    bool any_group = false;
    for (const auto &a : report.averages) {
        if (a.scope != "group") continue;
        if (!any_group) out << "== group averages ==\n";
        any_group = true;
        out << pad(a.name, 12) << "  " << pad(a.scorer_id, width) << "  " << fmt(a.average) << "  (" << a.cells
            << " cells)\n";
    }
    if (any_group) out << '\n';
    if (!report.pairwise.empty()) {
        out << "== pairwise accuracy ==\n";
        for (const auto &p : report.pairwise)
            out << pad(p.dataset_id, 12) << "  " << pad(p.scorer_id, width) << "  " << fmt(p.accuracy)
                << "  pairs=" << p.pairs_total << " human_ties=" << p.pairs_tied_human
                << " metric_ties=" << p.pairs_tied_metric << '\n';
        out << '\n';
    }
    if (!report.bias.empty()) {
        out << "== likelihood bias ==\n";
        for (const auto &b : report.bias)
            out << pad(b.dataset_id, 12) << "  " << pad(b.dimension, 12) << "  " << pad(b.scorer_id, width) << "  "
                << fmt(b.bias) << (b.degenerate ? "  (degenerate)" : "") << '\n';
        out << '\n';
    }
    for (const auto &[ds, n] : report.skipped) out << "skipped " << n << " instance(s) in " << ds << '\n';
    for (const auto &w : report.warnings) out << "warning: " << w << '\n';
    return out.str();
}

std::string to_string(CorrelationMethod m) { return m == CorrelationMethod::pearson ? "pearson" : "spearman"; }
std::string to_string(CorrelationPooling p) { return p == CorrelationPooling::pooled ? "pooled" : "per_system"; }

CorrelationMethod parse_correlation_method(const std::string &text) {
    if (text == "pearson") return CorrelationMethod::pearson;
    if (text == "spearman") return CorrelationMethod::spearman;
    throw Error(ErrorKind::Config, "correlation must be pearson or spearman");
}

CorrelationPooling parse_pooling(const std::string &text) {
    if (text == "pooled") return CorrelationPooling::pooled;
    if (text == "per_system") return CorrelationPooling::per_system;
    throw Error(ErrorKind::Config, "pooling must be pooled or per_system");
}

} // namespace contrastscore
