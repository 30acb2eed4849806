#include "dircollapse/report.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "dircollapse/certificates.hpp"
#include "dircollapse/error.hpp"
#include "dircollapse/fewshot.hpp"
#include "dircollapse/geometry.hpp"
#include "dircollapse/rng.hpp"

namespace dircollapse {

using nlohmann::json;

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io, "cannot open " + path.string());
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), digest, &len);
    std::ostringstream os;
    for (unsigned int k = 0; k < len; ++k) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[k]);
    return os.str();
}

namespace {

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

RunManifest make_manifest(std::string subcommand, json parameters, std::optional<std::uint64_t> seed) {
    RunManifest m;
    m.subcommand = std::move(subcommand);
    m.parameters = std::move(parameters);
    m.seed = seed;
    m.timestamp = utc_timestamp();
    return m;
}

json opt_number(std::optional<double> v) { return v ? json(*v) : json(nullptr); }

// Non-finite values are not representable in JSON.
json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string csv_opt(std::optional<double> v) { return v ? format_double(*v) : ""; }

std::string pair_label(std::uint32_t a, std::uint32_t b) { return std::to_string(a) + "-" + std::to_string(b); }

json source_json(const SourceArgs& s) {
    json j;
    if (s.input) {
        j["input"] = s.input->string();
        j["format"] = s.format == FileFormat::emb1 ? "emb1" : "csv";
        if (s.format == FileFormat::csv) j["label_columns"] = s.csv_label_columns;
    }
    if (s.spec) j["spec"] = s.spec->string();
    return j;
}

void add_digests(RunManifest& m, const SourceArgs& s) {
    if (s.input) m.input_digests[s.input->string()] = sha256_file(*s.input);
    if (s.spec) m.input_digests[s.spec->string()] = sha256_file(*s.spec);
}

EmbeddingDataset load_source_dataset(const SourceArgs& s) {
    if (!s.input) throw Error(Errc::usage, "--input is required");
    LoadOptions options;
    options.csv_label_columns = s.csv_label_columns;
    return load_embeddings(*s.input, s.format, options);
}

void require_one_source(const SourceArgs& s) {
    if (static_cast<bool>(s.input) == static_cast<bool>(s.spec))
        throw Error(Errc::usage, "exactly one of --input or --spec is required");
}

std::vector<std::uint32_t> all_classes(std::uint32_t k) {
    std::vector<std::uint32_t> out(k);
    for (std::uint32_t c = 0; c < k; ++c) out[c] = c;
    return out;
}

json pair_json(const PairGeometry& pg) {
    return json{{"i", pg.i},       {"j", pg.j},         {"d", pg.gap},         {"u", pg.axis},
                {"v_i", pg.var_i}, {"v_j", pg.var_j},   {"V", pg.cdnv},        {"V_dir", pg.dir_cdnv},
                {"theta", pg.theta}};
}

json bound_json(const BoundValue& b) {
    return json{{"i", b.i},
                {"j", b.j},
                {"leading", number(b.leading)},
                {"correction", number(b.correction)},
                {"total", number(b.total)},
                {"E1", number(b.e1)},
                {"E2", number(b.e2)},
                {"E3", number(b.e3)},
                {"denom", number(b.denom)},
                {"vacuous", b.vacuous}};
}

std::vector<PairGeometry> ordered_pairs(const std::vector<PairGeometry>& all, const std::vector<std::uint32_t>& classes) {
    std::vector<PairGeometry> out;
    for (auto a : classes)
        for (auto b : classes) {
            if (a == b) continue;
            auto it = std::find_if(all.begin(), all.end(), [&](const PairGeometry& pg) { return pg.i == a && pg.j == b; });
            if (it == all.end()) throw Error(Errc::usage, "no geometry for pair " + pair_label(a, b));
            out.push_back(*it);
        }
    return out;
}

CovarianceSpec parse_covariance(const json& j, std::size_t dim) {
    if (j.is_number()) return CovarianceSpec::isotropic(j.get<double>());
    if (!j.is_object()) throw Error(Errc::validation, "covariance must be a number or an object");
    if (j.contains("isotropic")) return CovarianceSpec::isotropic(j.at("isotropic").get<double>());
    if (j.contains("diagonal")) return CovarianceSpec::diag(j.at("diagonal").get<std::vector<double>>());
    if (j.contains("full")) {
        const auto rows = j.at("full").get<std::vector<std::vector<double>>>();
        RowMatrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != m.cols()) throw Error(Errc::validation, "ragged covariance matrix");
            for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) = rows[r][c];
        }
        (void)dim;
        return CovarianceSpec::matrix(std::move(m));
    }
    throw Error(Errc::validation, "covariance needs one of isotropic, diagonal, full");
}

}  // namespace

json RunManifest::to_json() const {
    return json{{"subcommand", subcommand},
                {"parameters", parameters},
                {"seed", seed ? json(*seed) : json(nullptr)},
                {"input_digests", input_digests},
                {"tool_version", tool_version},
                {"timestamp", timestamp}};
}

json CommandOutput::document() const {
    return json{{"schema_version", kSchemaVersion}, {"manifest", manifest.to_json()}, {"payload", payload},
                {"warnings", warnings}};
}

SyntheticSpec parse_synthetic_spec(const json& doc) {
    try {
        SyntheticSpec spec;
        spec.model = doc.at("model").get<std::string>();
        if (spec.model == "gaussian_pair") {
            GaussianPairSpec g;
            g.dim = doc.at("dim").get<std::size_t>();
            g.gap = doc.at("gap").get<double>();
            g.cov0 = parse_covariance(doc.at("class0"), g.dim);
            g.cov1 = parse_covariance(doc.at("class1"), g.dim);
            g.validate();
            spec.gaussian = std::move(g);
        } else if (spec.model == "two_point") {
            spec.two_point_dim = doc.value("dim", std::size_t{1});
            spec.two_point_gap = doc.at("gap").get<double>();
            spec.two_point_sigma2 = doc.at("sigma2").get<double>();
            TwoPointPairModel check(spec.two_point_dim, spec.two_point_gap, spec.two_point_sigma2);
        } else if (spec.model == "factor") {
            FactorModelSpec f;
            f.dim = doc.at("dim").get<std::size_t>();
            f.tasks = doc.at("tasks").get<std::size_t>();
            if (doc.at("deltas").is_number())
                f.deltas.assign(f.tasks, doc.at("deltas").get<double>());
            else
                f.deltas = doc.at("deltas").get<std::vector<double>>();
            f.eta_variance = doc.at("eta_variance").get<double>();
            f.xi = parse_covariance(doc.at("xi"), f.dim);
            f.frame_seed = doc.value("frame_seed", std::uint64_t{0});
            f.validate();
            spec.factor = std::move(f);
        } else {
            throw Error(Errc::validation, "unknown model '" + spec.model + "' (gaussian_pair, two_point, factor)");
        }
        return spec;
    } catch (const json::exception& e) {
        throw Error(Errc::validation, std::string("invalid spec: ") + e.what());
    }
}

SyntheticSpec load_synthetic_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io, "cannot open " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw Error(Errc::validation, "spec is not valid JSON: " + std::string(e.what()));
    }
    return parse_synthetic_spec(doc);
}

std::unique_ptr<ClassSampler> SyntheticSpec::sampler() const {
    if (gaussian) return std::make_unique<GaussianPairModel>(*gaussian);
    if (model == "two_point") return std::make_unique<TwoPointPairModel>(two_point_dim, two_point_gap, two_point_sigma2);
    throw Error(Errc::usage, "model '" + model + "' is not a class generator; synthesize a dataset first");
}

CommandOutput cmd_stats(const StatsArgs& args) {
    const auto ds = load_source_dataset(args.source);
    const LabelingGeometry geo(ds, args.labeling);

    std::vector<std::uint32_t> classes = args.classes.empty() ? all_classes(geo.num_classes()) : args.classes;
    if (args.pair) classes = {args.pair->first, args.pair->second};
    if (classes.size() < 2) throw Error(Errc::usage, "stats needs at least 2 classes");

    CommandOutput out;
    json params{{"source", source_json(args.source)}, {"labeling", args.labeling}, {"classes", classes}};
    if (args.pair) params["pair"] = {args.pair->first, args.pair->second};
    out.manifest = make_manifest("stats", params, std::nullopt);
    add_digests(out.manifest, args.source);

    json class_rows = json::array();
    for (auto c : classes) {
        const auto& s = geo.stats(c);
        class_rows.push_back({{"class_id", s.class_id}, {"n", s.count}, {"mu", s.mean}, {"v", s.variance}, {"m4", s.fourth_moment}});
    }
    std::vector<PairGeometry> pairs;
    for (auto a : classes)
        for (auto b : classes)
            if (a != b) pairs.push_back(geo.pair(a, b));
    json pair_rows = json::array();
    std::ostringstream csv;
    csv << "i,j,d,v_i,v_j,V,V_dir,theta\n";
    for (const auto& pg : pairs) {
        pair_rows.push_back(pair_json(pg));
        csv << pg.i << ',' << pg.j << ',' << format_double(pg.gap) << ',' << format_double(pg.var_i) << ','
            << format_double(pg.var_j) << ',' << format_double(pg.cdnv) << ',' << format_double(pg.dir_cdnv) << ','
            << format_double(pg.theta) << '\n';
    }
    const auto avg = cdnv_averages(pairs);
    out.payload = json{{"n", ds.n()},
                       {"d", ds.d()},
                       {"labeling", args.labeling},
                       {"classes", class_rows},
                       {"pairs", pair_rows},
                       {"averages", {{"V_dir_f", avg.dir_cdnv}, {"V_f", avg.cdnv}, {"V_f_sqrt", avg.sqrt_cdnv}}}};
    out.csv = csv.str();
    return out;
}

CommandOutput cmd_certify(const CertifyArgs& args) {
    require_one_source(args.source);
    if (args.m_values.empty()) throw Error(Errc::usage, "at least one m is required");
    for (auto m : args.m_values)
        if (m < 1) throw Error(Errc::usage, "m must be >= 1");

    std::vector<std::string> variants;
    for (const auto& v : args.variants) {
        if (v == "all") {
            for (const char* x : {"generic", "equal", "optimized", "prior"})
                if (std::find(variants.begin(), variants.end(), x) == variants.end()) variants.emplace_back(x);
        } else if (v == "generic" || v == "equal" || v == "optimized" || v == "prior") {
            if (std::find(variants.begin(), variants.end(), v) == variants.end()) variants.push_back(v);
        } else {
            throw Error(Errc::usage, "unknown variant '" + v + "' (generic, equal, optimized, prior, all)");
        }
    }
    const Weights weights{args.weight_t, args.weight_s, args.weight_q};
    if (!(weights.t > 0 && weights.s > 0 && weights.q > 0)) throw Error(Errc::usage, "weights must be positive");

    std::vector<PairGeometry> all_pairs;
    std::vector<std::uint32_t> classes = args.classes;
    if (args.source.input) {
        const auto ds = load_source_dataset(args.source);
        const LabelingGeometry geo(ds, args.labeling);
        if (classes.empty()) classes = all_classes(geo.num_classes());
        for (auto a : classes)
            for (auto b : classes)
                if (a != b) all_pairs.push_back(geo.pair(a, b));
    } else {
        const auto sampler = load_synthetic_spec(*args.source.spec).sampler();
        if (classes.empty()) classes = all_classes(sampler->num_classes());
        all_pairs = sampler->analytic_pairs();
    }
    if (classes.size() < 2) throw Error(Errc::usage, "certify needs at least 2 classes");
    const auto pairs = ordered_pairs(all_pairs, classes);
    const auto averages = cdnv_averages(pairs);

    CommandOutput out;
    out.manifest = make_manifest("certify",
                                 json{{"source", source_json(args.source)},
                                      {"labeling", args.labeling},
                                      {"classes", classes},
                                      {"m", args.m_values},
                                      {"variants", variants},
                                      {"weights", {weights.t, weights.s, weights.q}}},
                                 std::nullopt);
    add_digests(out.manifest, args.source);

    std::ostringstream csv;
    csv << std::boolalpha;
    csv << "m,variant,i,j,leading,correction,total,E1,E2,E3,denom,vacuous,error\n";
    json results = json::array();
    for (auto m : args.m_values) {
        for (const auto& v : variants) {
            json entry{{"m", m}, {"variant", v}};
            if (v == "prior") {
                const double total = baseline_bound_prior(averages, static_cast<std::uint32_t>(classes.size()), m);
                const double c = static_cast<double>(classes.size());
                entry["total"] = number(total);
                entry["vacuous"] = total >= (c - 1.0) / c;
                csv << m << ",prior,all,all,,," << format_double(total) << ",,,,," << (total >= (c - 1.0) / c) << ",\n";
                results.push_back(entry);
                continue;
            }
            const BoundVariant variant =
                v == "generic" ? BoundVariant::generic : v == "equal" ? BoundVariant::equal : BoundVariant::optimized;
            if (variant == BoundVariant::optimized && m < 10)
                out.warnings.push_back("m = " + std::to_string(m) + " is below the m >= 10 regime where the optimized bound is established");
            json per_pair = json::array();
            double sum = 0.0;
            bool valid = true;
            for (const auto& pg : pairs) {
                try {
                    const auto b = pairwise_bound(pg, m, variant, weights);
                    per_pair.push_back(bound_json(b));
                    sum += b.total;
                    csv << m << ',' << v << ',' << b.i << ',' << b.j << ',' << format_double(b.leading) << ','
                        << format_double(b.correction) << ',' << format_double(b.total) << ',' << format_double(b.e1)
                        << ',' << format_double(b.e2) << ',' << format_double(b.e3) << ',' << format_double(b.denom)
                        << ',' << b.vacuous << ",\n";
                } catch (const Error& e) {
                    if (e.code() != Errc::domain) throw;
                    valid = false;
                    per_pair.push_back(json{{"i", pg.i}, {"j", pg.j}, {"error", e.what()}});
                    csv << m << ',' << v << ',' << pg.i << ',' << pg.j << ",,,,,,,,," << '"' << e.what() << '"' << '\n';
                }
            }
            entry["pairs"] = per_pair;
            if (valid) {
                const auto mb = multiclass_bound(pairs, m, variant, weights);
                entry["total"] = number(mb.total);
                entry["vacuous"] = mb.vacuous;
                csv << m << ',' << v << ",all,all,,," << format_double(mb.total) << ",,,,," << mb.vacuous << ",\n";
            } else {
                entry["total"] = nullptr;
                entry["error"] = "one or more pairs violate the positive expected margin assumption";
                csv << m << ',' << v << ",all,all,,,,,,,,,\"invalid pair present\"\n";
            }
            (void)sum;
            results.push_back(entry);
        }
    }
    json asymptotic{{"linear", multiclass_asymptotic(pairs, AsymptoticVariant::linear)},
                    {"cantelli", multiclass_asymptotic(pairs, AsymptoticVariant::cantelli)}};
    json geometry = json::array();
    for (const auto& pg : pairs) geometry.push_back(pair_json(pg));
    out.payload = json{{"classes", classes},
                       {"geometry", geometry},
                       {"averages", {{"V_dir_f", averages.dir_cdnv}, {"V_f", averages.cdnv}, {"V_f_sqrt", averages.sqrt_cdnv}}},
                       {"asymptotic", asymptotic},
                       {"results", results}};
    out.csv = csv.str();
    return out;
}

CommandOutput cmd_fewshot(const FewshotArgs& args) {
    require_one_source(args.source);
    if (!args.seed) throw Error(Errc::usage, "--seed is required for fewshot");
    if (args.m_values.empty()) throw Error(Errc::usage, "at least one m is required");
    for (auto m : args.m_values)
        if (m < 1) throw Error(Errc::usage, "m must be >= 1");
    if (args.trials < 1) throw Error(Errc::usage, "trials must be >= 1");

    SweepOptions options;
    options.classes = args.classes;
    options.m_values = args.m_values;
    options.trials = args.trials;
    options.test_fraction = args.test_fraction;
    options.test_per_class = args.test_per_class;
    options.seed = *args.seed;

    SweepReport report;
    json params{{"source", source_json(args.source)},
                {"classes", args.classes},
                {"m", args.m_values},
                {"trials", args.trials}};
    if (args.source.input) {
        const auto ds = load_source_dataset(args.source);
        params["labeling"] = args.labeling;
        params["test_fraction"] = args.test_fraction;
        report = bound_vs_error_sweep(ds, args.labeling, options);
    } else {
        const auto sampler = load_synthetic_spec(*args.source.spec).sampler();
        params["test_per_class"] = args.test_per_class;
        report = bound_vs_error_sweep(*sampler, options);
    }

    CommandOutput out;
    out.manifest = make_manifest("fewshot", params, args.seed);
    add_digests(out.manifest, args.source);
    if (args.trials == 1) out.warnings.push_back("trials = 1: standard error unavailable");

    std::ostringstream csv;
    csv << "m,mc_error,mc_stderr,bound_optimized,bound_equal,bound_cantelli,bound_prior,bound_cantelli_sharp\n";
    json rows = json::array();
    for (const auto& r : report.rows) {
        rows.push_back(json{{"m", r.m},
                            {"mc_error", r.mc_error},
                            {"mc_stderr", opt_number(r.mc_stderr)},
                            {"bound_optimized", number(r.bound_optimized)},
                            {"bound_equal", number(r.bound_equal)},
                            {"bound_cantelli", number(r.bound_cantelli)},
                            {"bound_prior", number(r.bound_prior)},
                            {"bound_cantelli_sharp", number(r.bound_cantelli_sharp)}});
        csv << r.m << ',' << format_double(r.mc_error) << ',' << csv_opt(r.mc_stderr) << ','
            << format_double(r.bound_optimized) << ',' << format_double(r.bound_equal) << ','
            << format_double(r.bound_cantelli) << ',' << format_double(r.bound_prior) << ','
            << format_double(r.bound_cantelli_sharp) << '\n';
    }
    out.payload = json{{"classes", report.classes},
                       {"trials", report.trials},
                       {"seed", report.seed},
                       {"seed_scheme", std::string(kSeedScheme)},
                       {"rows", rows}};
    out.csv = csv.str();
    return out;
}

CommandOutput cmd_synth(const SynthArgs& args) {
    if (!args.seed) throw Error(Errc::usage, "--seed is required for synth");
    if (args.n < 1) throw Error(Errc::usage, "n must be >= 1");
    if (args.out.empty()) throw Error(Errc::usage, "--out is required");
    const auto spec = load_synthetic_spec(args.spec);

    CommandOutput out;
    out.manifest = make_manifest("synth", json{{"spec", args.spec.string()}, {"n", args.n}, {"out", args.out.string()}},
                                 args.seed);
    out.manifest.input_digests[args.spec.string()] = sha256_file(args.spec);

    json analytic;
    EmbeddingDataset ds;
    if (spec.factor) {
        const FactorModel model(*spec.factor);
        ds = model.sample(args.n, *args.seed);
        json tasks = json::array();
        for (const auto& t : model.analytics())
            tasks.push_back({{"labeling", t.labeling},
                             {"gap", t.gap},
                             {"V_dir", t.dir_cdnv},
                             {"V", t.cdnv},
                             {"V_lower_bound", t.cdnv_lower_bound}});
        analytic = json{{"model", "factor"},
                        {"tasks", tasks},
                        {"eta_trace", spec.factor->eta_variance * static_cast<double>(spec.factor->dim - spec.factor->tasks)},
                        {"frame_gram_residual", model.gram_residual()}};
    } else {
        const auto sampler = spec.sampler();
        ds = sample_classes(*sampler, args.n, *args.seed);
        json pairs = json::array();
        for (const auto& pg : sampler->analytic_pairs()) pairs.push_back(pair_json(pg));
        analytic = json{{"model", spec.model}, {"pairs", pairs}};
        if (spec.model == "two_point") {
            const TwoPointSpec law{spec.two_point_sigma2, spec.two_point_gap / 2.0};
            analytic["a"] = law.a();
            analytic["p"] = law.p();
        }
    }
    ds.source = "synth " + spec.model + " seed=" + std::to_string(*args.seed);
    write_embeddings(ds, args.out);

    auto sidecar_path = args.out;
    sidecar_path += ".json";
    out.payload = json{{"out", args.out.string()},
                       {"sidecar", sidecar_path.string()},
                       {"n", ds.n()},
                       {"d", ds.d()},
                       {"labelings", ds.labeling_names()},
                       {"analytic", analytic}};
    std::ofstream sidecar(sidecar_path);
    if (!sidecar) throw Error(Errc::io, "cannot write " + sidecar_path.string());
    sidecar << json{{"schema_version", kSchemaVersion}, {"analytic", analytic}, {"seed", *args.seed}}.dump(2) << '\n';

    std::ostringstream csv;
    csv << "labeling,i,j,gap,V_dir,V\n";
    if (spec.factor) {
        for (const auto& t : analytic["tasks"])
            csv << t["labeling"].get<std::string>() << ",0,1," << format_double(t["gap"].get<double>()) << ','
                << format_double(t["V_dir"].get<double>()) << ',' << format_double(t["V"].get<double>()) << '\n';
    } else {
        for (const auto& p : analytic["pairs"])
            csv << "class," << p["i"].get<std::uint32_t>() << ',' << p["j"].get<std::uint32_t>() << ','
                << format_double(p["d"].get<double>()) << ',' << format_double(p["V_dir"].get<double>()) << ','
                << format_double(p["V"].get<double>()) << '\n';
    }
    out.csv = csv.str();
    return out;
}

CommandOutput cmd_ortho(const OrthoArgs& args) {
    if (args.labeling_a == args.labeling_b) throw Error(Errc::usage, "distinct labelings required");
    const auto ds = load_source_dataset(args.source);
    const auto report = verify_orthogonality(ds, args.labeling_a, args.labeling_b, args.options);

    CommandOutput out;
    out.manifest = make_manifest("ortho",
                                 json{{"source", source_json(args.source)},
                                      {"labeling_a", args.labeling_a},
                                      {"labeling_b", args.labeling_b},
                                      {"balance_tolerance", args.options.balance_tolerance},
                                      {"independence_alpha", args.options.independence_alpha},
                                      {"slack_constant", args.options.slack_constant}},
                                 std::nullopt);
    add_digests(out.manifest, args.source);

    std::ostringstream csv;
    csv << "task_a,pair_a,task_b,pair_b,abs_cos,bound,satisfied\n";
    json entries = json::array();
    for (const auto& e : report.entries) {
        const std::string sat = e.satisfied ? (*e.satisfied ? "true" : "false") : "";
        csv << e.task_a << ',' << pair_label(e.a, e.a2) << ',' << e.task_b << ',' << pair_label(e.b, e.b2) << ','
            << format_double(e.abs_cos) << ',' << format_double(e.bound) << ',' << sat << '\n';
        entries.push_back({{"task_a", e.task_a},
                           {"pair_a", pair_label(e.a, e.a2)},
                           {"task_b", e.task_b},
                           {"pair_b", pair_label(e.b, e.b2)},
                           {"abs_cos", e.abs_cos},
                           {"bound", e.bound},
                           {"satisfied", e.satisfied ? json(*e.satisfied) : json(nullptr)}});
    }
    json hyp;
    if (report.hypotheses) {
        const auto& h = *report.hypotheses;
        hyp = json{{"max_imbalance", h.max_imbalance},
                   {"balance_tolerance", h.balance_tolerance},
                   {"chi_square", h.chi_square},
                   {"chi_square_threshold", h.chi_square_threshold},
                   {"degrees_of_freedom", h.degrees_of_freedom},
                   {"failures", h.failures}};
    }
    out.payload = json{{"status", report.status == OrthoStatus::ok ? "ok" : "hypotheses violated"},
                       {"median_abs_cos", report.median_abs_cos},
                       {"q25_abs_cos", report.q25_abs_cos},
                       {"q75_abs_cos", report.q75_abs_cos},
                       {"eps_stat", report.eps_stat},
                       {"violations", report.violations},
                       {"hypotheses", hyp},
                       {"entries", entries}};
    out.csv = csv.str();
    return out;
}

CommandOutput cmd_decompose(const DecomposeArgs& args) {
    const auto ds = load_source_dataset(args.source);
    const LabelingGeometry geo(ds, args.labeling);
    if (args.k_values.empty()) throw Error(Errc::usage, "at least one k is required");
    for (auto k : args.k_values)
        if (k < 1 || k >= ds.d())
            throw Error(Errc::usage, "k = " + std::to_string(k) + " must satisfy 1 <= k < d = " + std::to_string(ds.d()));

    auto pairs = args.pairs;
    if (args.random_pairs > 0) {
        if (!args.seed) throw Error(Errc::usage, "--seed is required with --random-pairs");
        if (!pairs.empty()) throw Error(Errc::usage, "--pairs and --random-pairs are exclusive");
        std::vector<std::pair<std::uint32_t, std::uint32_t>> candidates;
        for (std::uint32_t a = 0; a < geo.num_classes(); ++a)
            for (std::uint32_t b = a + 1; b < geo.num_classes(); ++b) candidates.emplace_back(a, b);
        if (args.random_pairs > candidates.size())
            throw Error(Errc::usage, "requested " + std::to_string(args.random_pairs) + " random pairs but only " +
                                         std::to_string(candidates.size()) + " exist");
        auto rng = make_rng(*args.seed, "decompose/pairs");
        std::shuffle(candidates.begin(), candidates.end(), rng);
        pairs.assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(args.random_pairs));
    }
    if (pairs.empty()) throw Error(Errc::usage, "select pairs with --pairs or --random-pairs");

    CommandOutput out;
    json sel = json::array();
    for (const auto& [a, b] : pairs) sel.push_back({a, b});
    out.manifest = make_manifest("decompose",
                                 json{{"source", source_json(args.source)},
                                      {"labeling", args.labeling},
                                      {"pairs", sel},
                                      {"random_pairs", args.random_pairs},
                                      {"k", args.k_values}},
                                 args.random_pairs > 0 ? args.seed : std::nullopt);
    add_digests(out.manifest, args.source);

    std::ostringstream csv;
    csv << "pair,axis_variance,ortho_total,trace,conservation";
    for (auto k : args.k_values) csv << ",top_" << k;
    csv << '\n';

    json rows = json::array();
    double sum_axis = 0.0, sum_total = 0.0, sum_trace = 0.0;
    std::vector<double> sum_k(args.k_values.size(), 0.0);
    for (const auto& [a, b] : pairs) {
        const auto rep = geo.decompose(a, b, args.k_values);
        const double conservation = rep.axis_variance + rep.ortho_total - rep.trace;
        json cumulative = json::object();
        csv << pair_label(a, b) << ',' << format_double(rep.axis_variance) << ',' << format_double(rep.ortho_total) << ','
            << format_double(rep.trace) << ',' << format_double(conservation);
        for (std::size_t q = 0; q < rep.ortho_cumulative.size(); ++q) {
            cumulative[std::to_string(rep.ortho_cumulative[q].first)] = rep.ortho_cumulative[q].second;
            sum_k[q] += rep.ortho_cumulative[q].second;
            csv << ',' << format_double(rep.ortho_cumulative[q].second);
        }
        csv << '\n';
        sum_axis += rep.axis_variance;
        sum_total += rep.ortho_total;
        sum_trace += rep.trace;
        rows.push_back({{"pair", pair_label(a, b)},
                        {"axis_variance", rep.axis_variance},
                        {"ortho_total", rep.ortho_total},
                        {"trace", rep.trace},
                        {"conservation", conservation},
                        {"ortho_cumulative", cumulative}});
    }
    const double np = static_cast<double>(pairs.size());
    json avg_cumulative = json::object();
    csv << "average," << format_double(sum_axis / np) << ',' << format_double(sum_total / np) << ','
        << format_double(sum_trace / np) << ',' << format_double((sum_axis + sum_total - sum_trace) / np);
    for (std::size_t q = 0; q < args.k_values.size(); ++q) {
        avg_cumulative[std::to_string(args.k_values[q])] = sum_k[q] / np;
        csv << ',' << format_double(sum_k[q] / np);
    }
    csv << '\n';
    out.payload = json{{"labeling", args.labeling},
                       {"rows", rows},
                       {"average",
                        {{"axis_variance", sum_axis / np},
                         {"ortho_total", sum_total / np},
                         {"trace", sum_trace / np},
                         {"ortho_cumulative", avg_cumulative}}}};
    out.csv = csv.str();
    return out;
}

}  // namespace dircollapse
