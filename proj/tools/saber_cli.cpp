// saber: command-line driver for the belief-estimation pipeline.
//
//   saber synth     --instances-out I --features-out F [generator flags]
//   saber label     --instances I --out L
//   saber featurize --features F --instances I --out X
//   saber train     --features F|X --instances I --out-dir D [training flags]
//   saber eval      --pk P --ck C --features F|X --instances I --out-dir D
//   saber sweep     --pk P --ck C --features F|X --instances I --out-dir D
//   saber report    --decisions D --instances I --out-dir D
//
// Exit status: 0 success, 1 usage error, 2 data error, 3 internal error.

#include "saber/saber.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

namespace {

using saber::Json;

std::vector<double> parse_grid(const std::string& text) {
    if (text == "default") return saber::default_tau_grid();
    if (text == "none") return {};
    std::vector<double> grid;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto end = text.find(',', start);
        const auto item = text.substr(start, end == std::string::npos ? std::string::npos : end - start);
        try {
            std::size_t used = 0;
            grid.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw saber::usage_error("invalid tau grid entry: '" + item + "'");
        }
        if (end == std::string::npos) break;
        start = end + 1;
    }
    return grid;
}

saber::Mode parse_mode(const std::string& s) {
    if (s == "default") return saber::Mode::fallback;
    if (s == "abstention") return saber::Mode::abstention;
    throw saber::usage_error("mode must be default or abstention");
}

void print_config(const Json& config) { std::cout << "effective config: " << config.dump() << "\n"; }

void print_histogram(const saber::CellHistogram& h, std::size_t total) {
    static constexpr const char* names[] = {"C00", "C10", "C01", "C11"};
    for (std::size_t i = 0; i < 4; ++i) {
        const double frac = total ? static_cast<double>(h[i]) / static_cast<double>(total) : 0.0;
        std::cout << names[i] << " " << h[i] << " " << saber::format_number(frac) << "\n";
    }
}

void print_report(const saber::EvalReport& r) {
    std::cout << "n " << r.n << "\n"
              << "acc " << saber::format_number(r.acc()) << "\n"
              << "cf " << saber::format_metric(r.cf()) << "\n"
              << "kf " << saber::format_metric(r.kf()) << "\n"
              << "mfs " << saber::format_metric(r.mfs()) << "\n"
              << "score " << saber::format_number(r.score()) << "\n"
              << "coverage " << saber::format_number(r.coverage()) << "\n"
              << "risk_answered " << saber::format_metric(r.risk_answered()) << "\n"
              << "abstain_f1 " << saber::format_number(r.abstain_f1()) << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Self-aware belief estimation for retrieval-augmented QA"};
    app.set_config("--config", "", "TOML/INI file with option defaults (flags take precedence)");
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(saber::kToolVersion));

    // label
    std::string label_in, label_out;
    auto* label = app.add_subcommand("label", "Label PK/CK answers against gold aliases");
    label->add_option("--instances", label_in, "Instance file (JSON Lines)")->required();
    label->add_option("--out", label_out, "Labeled output file")->required();

    // synth
    saber::SynthConfig syn;
    std::vector<double> syn_fracs(syn.cell_fracs.begin(), syn.cell_fracs.end());
    std::vector<double> syn_split{0.8, 0.1, 0.1};
    std::string syn_instances, syn_features;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic benchmark");
    synth->add_option("--instances-out", syn_instances, "Instance file to write")->required();
    synth->add_option("--features-out", syn_features, "Feature file to write")->required();
    synth->add_option("--n", syn.n, "Instance count")->capture_default_str();
    synth->add_option("--cell-fracs", syn_fracs, "C00,C10,C01,C11 fractions")->delimiter(',')->expected(4)->capture_default_str();
    synth->add_option("--d-prior", syn.d_p, "Prior vector dimension")->capture_default_str();
    synth->add_option("--d-cond", syn.d_c, "Conditional vector dimension")->capture_default_str();
    synth->add_option("--traces", syn.k_traces, "Traces per side")->capture_default_str();
    synth->add_option("--signal", syn.signal, "Cluster-mean separation")->capture_default_str();
    synth->add_option("--noise-sigma", syn.noise_sigma, "Gaussian noise std")->capture_default_str();
    synth->add_option("--label-flip", syn.label_flip, "Per-side feature label flip probability")->capture_default_str();
    synth->add_option("--seed", syn.seed, "Global seed")->capture_default_str();
    synth->add_option("--dataset-tag", syn.dataset_tag, "dataset_tag of generated instances")->capture_default_str();
    synth->add_option("--split-fracs", syn_split, "train,val,test fractions")->delimiter(',')->expected(3)->capture_default_str();

    // featurize
    std::string fz_features, fz_instances, fz_out;
    double fz_epsilon = 1e-6;
    auto* featurize = app.add_subcommand("featurize", "Build standardized fused inputs");
    featurize->add_option("--features", fz_features, "Raw feature file")->required();
    featurize->add_option("--instances", fz_instances, "Instance file (supplies splits)")->required();
    featurize->add_option("--out", fz_out, "Fused output file")->required();
    featurize->add_option("--epsilon", fz_epsilon, "Standard deviation floor")->capture_default_str();

    // train
    saber::TrainRequest tr;
    std::vector<double> tr_split{0.8, 0.1, 0.1};
    std::string tr_group = "id";
    bool tr_resplit = false;
    std::uint64_t tr_split_seed = 42;
    auto* train = app.add_subcommand("train", "Train the PK and CK predictors");
    train->add_option("--features", tr.features_path, "Raw or fused feature file")->required();
    train->add_option("--instances", tr.instances_path, "Instance file")->required();
    train->add_option("--out-dir", tr.out_dir, "Output directory")->required();
    train->add_option("--hidden-dims", tr.net.hidden_dims, "Hidden layer sizes")->delimiter(',')->capture_default_str();
    train->add_option("--dropout", tr.net.dropout_rate, "Dropout rate")->capture_default_str();
    train->add_option("--seed", tr.net.seed, "Global seed")->capture_default_str();
    train->add_option("--lr", tr.train.lr, "Learning rate")->capture_default_str();
    train->add_option("--weight-decay", tr.train.weight_decay, "Decoupled weight decay")->capture_default_str();
    train->add_option("--beta1", tr.train.beta1)->capture_default_str();
    train->add_option("--beta2", tr.train.beta2)->capture_default_str();
    train->add_option("--eps-opt", tr.train.eps_opt)->capture_default_str();
    train->add_option("--batch-size", tr.train.batch_size)->capture_default_str();
    train->add_option("--max-epochs", tr.train.max_epochs)->capture_default_str();
    train->add_option("--patience", tr.train.patience)->capture_default_str();
    train->add_option("--epsilon", tr.epsilon, "Standard deviation floor")->capture_default_str();
    train->add_flag("--resplit", tr_resplit, "Re-derive splits by group instead of using the file's split field");
    train->add_option("--split-fracs", tr_split, "train,val,test fractions for --resplit")->delimiter(',')->expected(3)->capture_default_str();
    train->add_option("--split-seed", tr_split_seed, "Seed for --resplit")->capture_default_str();
    train->add_option("--group-key", tr_group, "Grouping field for --resplit")->capture_default_str();

    // eval
    saber::EvalRequest ev;
    std::string ev_mode = "default", ev_split = "test";
    auto* eval = app.add_subcommand("eval", "Decide and score with a trained checkpoint pair");
    eval->add_option("--pk", ev.pk_path, "PK predictor checkpoint")->required();
    eval->add_option("--ck", ev.ck_path, "CK predictor checkpoint")->required();
    eval->add_option("--features", ev.features_path, "Raw or fused feature file")->required();
    eval->add_option("--instances", ev.instances_path, "Instance file")->required();
    eval->add_option("--out-dir", ev.out_dir, "Output directory")->required();
    eval->add_option("--mode", ev_mode, "default or abstention")->capture_default_str();
    eval->add_option("--tau", ev.mode.tau, "Reliability threshold")->capture_default_str();
    eval->add_option("--split", ev_split, "train, val, test or all")->capture_default_str();

    // sweep
    saber::SweepRequest sw;
    std::string sw_grid = "default", sw_split = "test";
    auto* sweep = app.add_subcommand("sweep", "Threshold sweep and risk-coverage plot");
    sweep->add_option("--pk", sw.pk_path, "PK predictor checkpoint")->required();
    sweep->add_option("--ck", sw.ck_path, "CK predictor checkpoint")->required();
    sweep->add_option("--features", sw.features_path, "Raw or fused feature file")->required();
    sweep->add_option("--instances", sw.instances_path, "Instance file")->required();
    sweep->add_option("--out-dir", sw.out_dir, "Output directory")->required();
    sweep->add_option("--grid", sw_grid, "default, none, or comma-separated tau values")->capture_default_str();
    sweep->add_option("--tau", sw.summary_mode.tau, "Threshold of the summary row")->capture_default_str();
    sweep->add_option("--split", sw_split, "train, val, test or all")->capture_default_str();

    // report
    saber::ReportRequest rp;
    std::string rp_grid = "default";
    auto* report = app.add_subcommand("report", "Metrics and sweep from recorded decisions");
    report->add_option("--decisions", rp.decisions_path, "decisions.jsonl written by eval")->required();
    report->add_option("--instances", rp.instances_path, "Instance file")->required();
    report->add_option("--out-dir", rp.out_dir, "Output directory")->required();
    report->add_option("--grid", rp_grid, "default, none, or comma-separated tau values")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*label) {
            const Json config = {{"instances", label_in}, {"out", label_out}};
            print_config(config);
            const auto s = saber::cmd_label(label_in, label_out, config);
            for (const auto& issue : s.skipped)
                std::cerr << "warning: " << label_in << ":" << issue.line << ": " << issue.message << "\n";
            std::cout << "labeled " << s.labeled << " skipped " << s.skipped.size() << "\n";
            print_histogram(s.histogram, s.labeled);
            if (!s.skipped.empty()) std::cerr << "warnings: " << s.skipped.size() << "\n";
        } else if (*synth) {
            std::copy(syn_fracs.begin(), syn_fracs.end(), syn.cell_fracs.begin());
            syn.split.train_frac = syn_split[0];
            syn.split.val_frac = syn_split[1];
            syn.split.test_frac = syn_split[2];
            syn.validate();
            syn.split.validate();
            Json config = saber::synth_config_json(syn);
            config["instances_out"] = syn_instances;
            config["features_out"] = syn_features;
            print_config(config);
            const auto bench = saber::cmd_synth(syn, syn_instances, syn_features, config);
            saber::CellHistogram h{};
            for (auto c : bench.planted) ++h[saber::histogram_index(c)];
            std::cout << "generated " << bench.instances.size() << "\n";
            print_histogram(h, bench.instances.size());
        } else if (*featurize) {
            const Json config = {{"features", fz_features}, {"instances", fz_instances}, {"out", fz_out},
                                 {"epsilon", fz_epsilon}};
            print_config(config);
            const auto f = saber::cmd_featurize(fz_features, fz_instances, fz_out, fz_epsilon, config);
            std::cout << "featurized " << f.inputs.size() << " dim " << f.manifest.input_dim() << "\n";
        } else if (*train) {
            if (tr_resplit) {
                saber::SplitConfig sc;
                sc.train_frac = tr_split[0];
                sc.val_frac = tr_split[1];
                sc.test_frac = tr_split[2];
                sc.seed = tr_split_seed;
                sc.group_key = tr_group;
                sc.validate();
                tr.resplit = sc;
            }
            tr.train.validate();
            Json config = {{"features", tr.features_path}, {"instances", tr.instances_path},
                           {"out_dir", tr.out_dir},        {"hidden_dims", tr.net.hidden_dims},
                           {"dropout", tr.net.dropout_rate}, {"seed", tr.net.seed},
                           {"lr", tr.train.lr},            {"weight_decay", tr.train.weight_decay},
                           {"beta1", tr.train.beta1},      {"beta2", tr.train.beta2},
                           {"eps_opt", tr.train.eps_opt},  {"batch_size", tr.train.batch_size},
                           {"max_epochs", tr.train.max_epochs}, {"patience", tr.train.patience},
                           {"epsilon", tr.epsilon}};
            config["resplit"] = tr_resplit ? Json{{"fracs", tr_split}, {"seed", tr_split_seed}, {"group_key", tr_group}}
                                           : Json(nullptr);
            print_config(config);
            const auto r = saber::cmd_train(tr, config);
            for (const auto* side : {&r.pk, &r.ck})
                std::cout << saber::format_stop_line(side->side, side->net.meta) << "\n";
            std::cout << "wrote " << r.pk_path << " " << r.ck_path << " " << r.log_path << "\n";
        } else if (*eval) {
            ev.mode.mode = parse_mode(ev_mode);
            ev.split = saber::parse_split_filter(ev_split);
            ev.mode.validate();
            const Json config = {{"pk", ev.pk_path},   {"ck", ev.ck_path},         {"features", ev.features_path},
                                 {"instances", ev.instances_path}, {"out_dir", ev.out_dir},
                                 {"mode", ev_mode},    {"tau", ev.mode.tau},      {"split", ev_split}};
            print_config(config);
            const auto r = saber::cmd_eval(ev, config);
            print_report(r.report);
            std::cout << "wrote " << r.decisions_path << " " << r.report_path << "\n";
        } else if (*sweep) {
            sw.grid = parse_grid(sw_grid);
            sw.split = saber::parse_split_filter(sw_split);
            sw.summary_mode.validate();
            const Json config = {{"pk", sw.pk_path},   {"ck", sw.ck_path},     {"features", sw.features_path},
                                 {"instances", sw.instances_path}, {"out_dir", sw.out_dir},
                                 {"grid", sw.grid},    {"tau", sw.summary_mode.tau}, {"split", sw_split}};
            print_config(config);
            const auto r = saber::cmd_sweep(sw, config);
            std::cout << "rows " << r.rows.size() << "\n";
            std::cout << "wrote " << r.csv_path << " " << r.svg_path << "\n";
        } else if (*report) {
            rp.grid = parse_grid(rp_grid);
            const Json config = {{"decisions", rp.decisions_path}, {"instances", rp.instances_path},
                                 {"out_dir", rp.out_dir},          {"grid", rp.grid}};
            print_config(config);
            const auto r = saber::cmd_report(rp, config);
            print_report(r.report);
            std::cout << "wrote " << r.json_path << " " << r.sweep.csv_path << " " << r.sweep.svg_path << "\n";
        }
    } catch (const saber::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
