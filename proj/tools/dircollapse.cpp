// dircollapse: few-shot error certificates from embedding geometry.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "dircollapse/error.hpp"
#include "dircollapse/kernels.hpp"
#include "dircollapse/report.hpp"

namespace {

using namespace dircollapse;

struct OutputArgs {
    std::string out_json;
    std::string out_csv;
    int threads{0};
};

struct SourceFlags {
    std::string input;
    std::string format{"emb1"};
    std::size_t label_columns{1};
    std::string spec;

    SourceArgs to_args() const {
        SourceArgs s;
        if (!input.empty()) s.input = input;
        if (!spec.empty()) s.spec = spec;
        s.format = parse_format(format);
        s.csv_label_columns = label_columns;
        return s;
    }
};

void add_output_flags(CLI::App* app, OutputArgs& o) {
    app->add_option("--out-json", o.out_json, "write the JSON document here (default: stdout)");
    app->add_option("--out-csv", o.out_csv, "write the CSV table here");
    app->add_option("--threads", o.threads, "worker threads (0 = runtime default)")->check(CLI::NonNegativeNumber);
}

void add_source_flags(CLI::App* app, SourceFlags& s, bool allow_spec) {
    app->add_option("--input", s.input, "embedding file (EMB1 or CSV)");
    app->add_option("--format", s.format, "input format: emb1 or csv")->check(CLI::IsMember({"emb1", "csv"}));
    app->add_option("--label-columns", s.label_columns, "number of trailing label columns in CSV input");
    if (allow_spec) app->add_option("--spec", s.spec, "synthetic generator spec (JSON) instead of --input");
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::io, "cannot write " + path);
    out << text;
}

void emit(const CommandOutput& result, const OutputArgs& o) {
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
    const std::string doc = result.document().dump(2) + "\n";
    if (o.out_json.empty())
        std::cout << doc;
    else
        write_text(o.out_json, doc);
    if (!o.out_csv.empty()) write_text(o.out_csv, result.csv);
}

std::pair<std::uint32_t, std::uint32_t> parse_pair(const std::string& text) {
    const auto comma = text.find(',');
    if (comma == std::string::npos) throw Error(Errc::usage, "pair must be written i,j: '" + text + "'");
    try {
        return {static_cast<std::uint32_t>(std::stoul(text.substr(0, comma))),
                static_cast<std::uint32_t>(std::stoul(text.substr(comma + 1)))};
    } catch (const std::exception&) {
        throw Error(Errc::usage, "pair must be written i,j: '" + text + "'");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Directional neural collapse certificates for few-shot transfer"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);

    OutputArgs out;
    SourceFlags src;

    StatsArgs stats;
    std::string stats_pair;
    auto* cmd_s = app.add_subcommand("stats", "per-class moments and pairwise geometry");
    add_source_flags(cmd_s, src, false);
    add_output_flags(cmd_s, out);
    cmd_s->add_option("--labeling", stats.labeling, "labeling to analyse");
    cmd_s->add_option("--classes", stats.classes, "restrict to these class ids");
    cmd_s->add_option("--pairs", stats_pair, "a single pair i,j (both orientations are reported)");

    CertifyArgs certify;
    auto* cmd_c = app.add_subcommand("certify", "few-shot error certificates");
    add_source_flags(cmd_c, src, true);
    add_output_flags(cmd_c, out);
    cmd_c->add_option("--labeling", certify.labeling, "labeling to certify");
    cmd_c->add_option("--classes", certify.classes, "class subset (C')");
    cmd_c->add_option("--m", certify.m_values, "shots per class")->required();
    cmd_c->add_option("--variant", certify.variants, "generic, equal, optimized, prior or all");
    cmd_c->add_option("--lambda-t", certify.weight_t, "weight of the centroid-shift term (generic)");
    cmd_c->add_option("--lambda-s", certify.weight_s, "weight of the cross term (generic)");
    cmd_c->add_option("--lambda-q", certify.weight_q, "weight of the quadratic term (generic)");

    FewshotArgs fewshot;
    std::uint64_t fewshot_seed = 0;
    auto* cmd_f = app.add_subcommand("fewshot", "Monte Carlo few-shot error against the certificates");
    add_source_flags(cmd_f, src, true);
    add_output_flags(cmd_f, out);
    cmd_f->add_option("--labeling", fewshot.labeling, "labeling to evaluate");
    cmd_f->add_option("--classes", fewshot.classes, "class subset (C')");
    cmd_f->add_option("--m", fewshot.m_values, "shots per class")->required();
    cmd_f->add_option("--trials", fewshot.trials, "Monte Carlo trials");
    auto* f_seed = cmd_f->add_option("--seed", fewshot_seed, "master seed");
    cmd_f->add_option("--test-fraction", fewshot.test_fraction, "held-out fraction per class (datasets)")
        ->check(CLI::Range(0.0, 1.0));
    cmd_f->add_option("--test-per-class", fewshot.test_per_class, "test points per class (generators)");

    SynthArgs synth;
    std::string synth_spec, synth_out;
    std::uint64_t synth_seed = 0;
    auto* cmd_y = app.add_subcommand("synth", "sample a synthetic embedding dataset");
    add_output_flags(cmd_y, out);
    cmd_y->add_option("--spec", synth_spec, "generator spec (JSON)")->required();
    cmd_y->add_option("--n", synth.n, "samples per class (factor model: total)")->required();
    auto* y_seed = cmd_y->add_option("--seed", synth_seed, "master seed");
    cmd_y->add_option("--out", synth_out, "EMB1 output path")->required();

    OrthoArgs ortho;
    auto* cmd_o = app.add_subcommand("ortho", "cross-task orthogonality of decision axes");
    add_source_flags(cmd_o, src, false);
    add_output_flags(cmd_o, out);
    cmd_o->add_option("--labeling-a", ortho.labeling_a, "first labeling")->required();
    cmd_o->add_option("--labeling-b", ortho.labeling_b, "second labeling")->required();
    cmd_o->add_option("--balance-tolerance", ortho.options.balance_tolerance, "max |n_c/n - 1/K|");
    cmd_o->add_option("--alpha", ortho.options.independence_alpha, "independence test level");
    cmd_o->add_option("--slack", ortho.options.slack_constant, "eps_stat = slack / sqrt(min class size)");

    DecomposeArgs decompose;
    std::vector<std::string> decompose_pairs;
    std::uint64_t decompose_seed = 0;
    auto* cmd_d = app.add_subcommand("decompose", "axis versus orthogonal variance split");
    add_source_flags(cmd_d, src, false);
    add_output_flags(cmd_d, out);
    cmd_d->add_option("--labeling", decompose.labeling, "labeling");
    cmd_d->add_option("--pairs", decompose_pairs, "pairs i,j");
    cmd_d->add_option("--random-pairs", decompose.random_pairs, "number of random distinct pairs");
    auto* d_seed = cmd_d->add_option("--seed", decompose_seed, "seed for --random-pairs");
    cmd_d->add_option("--k", decompose.k_values, "top-k orthogonal eigenvalues to accumulate");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (out.threads > 0) kernels::set_num_threads(out.threads);
        CommandOutput result;
        if (cmd_s->parsed()) {
            stats.source = src.to_args();
            if (!stats_pair.empty()) stats.pair = parse_pair(stats_pair);
            result = cmd_stats(stats);
        } else if (cmd_c->parsed()) {
            certify.source = src.to_args();
            result = cmd_certify(certify);
        } else if (cmd_f->parsed()) {
            fewshot.source = src.to_args();
            if (*f_seed) fewshot.seed = fewshot_seed;
            result = cmd_fewshot(fewshot);
        } else if (cmd_y->parsed()) {
            synth.spec = synth_spec;
            synth.out = synth_out;
            if (*y_seed) synth.seed = synth_seed;
            result = cmd_synth(synth);
        } else if (cmd_o->parsed()) {
            ortho.source = src.to_args();
            result = cmd_ortho(ortho);
        } else if (cmd_d->parsed()) {
            decompose.source = src.to_args();
            for (const auto& p : decompose_pairs) decompose.pairs.push_back(parse_pair(p));
            if (*d_seed) decompose.seed = decompose_seed;
            result = cmd_decompose(decompose);
        }
        emit(result, out);
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 1;
    }
}
