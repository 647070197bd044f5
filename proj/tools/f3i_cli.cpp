// Command-line front end. Talks to the library only through the C interface.
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "f3i/f3i.h"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kManifest = "manifest.json";

struct CliError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void check(f3i_status s) {
    if (s != F3I_OK) throw CliError(std::string(f3i_status_string(s)) + ": " + f3i_last_error());
}

struct MatrixDeleter {
    void operator()(f3i_matrix* m) const { f3i_matrix_free(m); }
};
struct RunDeleter {
    void operator()(f3i_run* r) const { f3i_run_free(r); }
};
struct JointDeleter {
    void operator()(f3i_joint* j) const { f3i_joint_free(j); }
};
using Matrix = std::unique_ptr<f3i_matrix, MatrixDeleter>;
using Run = std::unique_ptr<f3i_run, RunDeleter>;
using Joint = std::unique_ptr<f3i_joint, JointDeleter>;

struct Table {
    std::vector<std::string> header;
    std::size_t rows = 0;
    std::vector<double> values;  // NaN for empty cells
};

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string trim(std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
    std::size_t b = 0;
    while (b < s.size() && (s[b] == ' ' || s[b] == '\t')) ++b;
    return s.substr(b);
}

Table read_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw CliError("cannot open " + path.string());
    Table t;
    std::string line;
    if (!std::getline(in, line)) throw CliError(path.string() + ": empty file");
    for (auto& h : split_line(trim(line))) t.header.push_back(trim(h));
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty()) continue;
        auto cells = split_line(line);
        if (cells.size() != t.header.size())
            throw CliError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                           std::to_string(t.header.size()) + " fields, found " + std::to_string(cells.size()));
        for (auto& c : cells) {
            c = trim(c);
            if (c.empty()) {
                t.values.push_back(std::numeric_limits<double>::quiet_NaN());
                continue;
            }
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(c, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != c.size() || !std::isfinite(v))
                throw CliError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + c + "'");
            t.values.push_back(v);
        }
        ++t.rows;
    }
    return t;
}

std::vector<std::string> default_header(std::size_t cols) {
    std::vector<std::string> h;
    for (std::size_t f = 0; f < cols; ++f) h.push_back("x" + std::to_string(f));
    return h;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CliError("cannot write " + path.string());
    return out;
}

void write_header(std::ofstream& out, const std::vector<std::string>& header) {
    for (std::size_t f = 0; f < header.size(); ++f) out << (f ? "," : "") << header[f];
    out << '\n';
}

// With blank_missing, masked cells are written empty; NaN cells are always empty.
void write_matrix(const fs::path& path, const std::vector<std::string>& header, const f3i_matrix* m,
                  bool blank_missing) {
    const std::size_t r = f3i_matrix_rows(m), c = f3i_matrix_cols(m);
    std::vector<double> v(r * c);
    std::vector<uint8_t> mask(r * c);
    check(f3i_matrix_values(m, v.data()));
    check(f3i_matrix_mask(m, mask.data()));
    auto out = open_out(path);
    write_header(out, header);
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t f = 0; f < c; ++f) {
            if (f) out << ',';
            const std::size_t q = i * c + f;
            if (!(blank_missing && mask[q]) && !std::isnan(v[q])) out << format_double(v[q]);
        }
        out << '\n';
    }
}

void write_mask(const fs::path& path, const std::vector<std::string>& header, const f3i_matrix* m) {
    const std::size_t r = f3i_matrix_rows(m), c = f3i_matrix_cols(m);
    std::vector<uint8_t> mask(r * c);
    check(f3i_matrix_mask(m, mask.data()));
    auto out = open_out(path);
    write_header(out, header);
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t f = 0; f < c; ++f) out << (f ? "," : "") << int(mask[i * c + f]);
        out << '\n';
    }
}

void write_json(const fs::path& path, const json& j) {
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

Matrix load_matrix(const Table& t) {
    f3i_matrix* m = nullptr;
    check(f3i_matrix_create(t.rows, t.header.size(), t.values.data(), &m));
    return Matrix(m);
}

struct Options {
    std::size_t n = 50;
    std::size_t f = 100;
    double sigma = 0.1;
    std::string mechanism = "mcar";
    double p_miss = 0.25;
    std::size_t k = 5;
    std::size_t max_iter = 500;
    double eta = 0.001;
    double beta = 0.5;
    double h = 0.0;
    uint64_t seed = 0;
    unsigned jobs = 1;
    std::string truth;
    std::string out = ".";
    bool normalize = false;

    std::string input;
    std::string method = "f3i";
    std::string check;
    std::size_t runs = 100;
    std::string labels;
    std::size_t epochs = 10;
    double lr = 0.5;
    std::string loss = "bce";
    double train_frac = 0.7;
    double val_frac = 0.2;
};

f3i_mechanism parse_mechanism(const std::string& s) {
    if (s == "mcar") return F3I_MCAR;
    if (s == "mar") return F3I_MAR_LOGISTIC;
    if (s == "mnar-gsm") return F3I_MNAR_GSM;
    throw CliError("unknown mechanism " + s);
}

f3i_config make_config(const Options& o) {
    f3i_config c = f3i_config_default();
    c.n_neighbors = o.k;
    c.max_iter = o.max_iter;
    c.eta = o.eta;
    c.bandwidth = o.h;
    c.seed = o.seed;
    c.normalize = o.normalize ? 1 : 0;
    return c;
}

f3i_joint_config make_joint(const Options& o) {
    f3i_joint_config j = f3i_joint_config_default();
    j.beta = o.beta;
    j.epochs = o.epochs;
    j.classifier_lr = o.lr;
    if (o.loss == "bce")
        j.loss_variant = F3I_LOSS_BCE;
    else if (o.loss == "positive")
        j.loss_variant = F3I_LOSS_POSITIVE;
    else
        throw CliError("unknown loss " + o.loss);
    j.train_fraction = o.train_frac;
    j.validation_fraction = o.val_frac;
    return j;
}

json config_json(const f3i_config& c) {
    return {{"n_neighbors", c.n_neighbors}, {"max_iter", c.max_iter}, {"eta", c.eta},
            {"bandwidth", c.bandwidth > 0 ? json(c.bandwidth) : json(nullptr)},
            {"normalize", c.normalize != 0}, {"seed", c.seed}};
}

const char* stop_name(f3i_stop_reason r) { return r == F3I_STOP_EARLY ? "early_stop" : "budget_exhausted"; }

class Manifest {
public:
    Manifest(std::string command, fs::path dir) : command_(std::move(command)), dir_(std::move(dir)) {
        start_ = std::chrono::steady_clock::now();
    }
    json& config() { return config_; }
    void input(const std::string& p) { inputs_.push_back(p); }
    void output(const std::string& name) { outputs_.push_back(name); }
    void write(uint64_t seed) {
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        json j = {{"command", command_}, {"library_version", f3i_version()}, {"seed", seed},
                  {"config", config_},   {"inputs", inputs_},                 {"outputs", outputs_},
                  {"wall_clock_seconds", secs}};
        write_json(dir_ / kManifest, j);
    }

private:
    std::string command_;
    fs::path dir_;
    json config_ = json::object();
    std::vector<std::string> inputs_, outputs_;
    std::chrono::steady_clock::time_point start_;
};

fs::path prepare_out(const std::string& dir) {
    fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw CliError("cannot create " + dir + ": " + ec.message());
    return p;
}

int cmd_generate(const Options& o) {
    const fs::path dir = prepare_out(o.out);
    Manifest manifest("generate", dir);
    f3i_missingness spec = f3i_missingness_default();
    spec.mechanism = parse_mechanism(o.mechanism);
    spec.p_miss = o.p_miss;
    f3i_matrix *c = nullptr, *m = nullptr;
    std::vector<double> mu(o.f);
    check(f3i_generate(o.n, o.f, o.sigma, &spec, o.seed, &c, &m, mu.data()));
    Matrix complete(c), masked(m);
    const auto header = default_header(o.f);
    write_matrix(dir / "complete.csv", header, complete.get(), false);
    write_matrix(dir / "masked.csv", header, masked.get(), true);
    write_mask(dir / "mask.csv", header, masked.get());
    json params = {{"manifest", kManifest}, {"n", o.n},     {"f", o.f},
                   {"sigma", o.sigma},      {"mu", mu},      {"mechanism", o.mechanism},
                   {"p_miss", o.p_miss},    {"seed", o.seed}};
    write_json(dir / "params.json", params);
    manifest.config() = {{"n", o.n}, {"f", o.f}, {"sigma", o.sigma}, {"mechanism", o.mechanism}, {"p_miss", o.p_miss}};
    for (const char* name : {"complete.csv", "masked.csv", "mask.csv", "params.json"}) manifest.output(name);
    manifest.write(o.seed);
    return 0;
}

int cmd_impute(const Options& o) {
    const Table input = read_csv(o.input);
    const fs::path dir = prepare_out(o.out);
    Manifest manifest("impute", dir);
    manifest.input(o.input);
    Matrix x = load_matrix(input);

    const f3i_config cfg = make_config(o);
    Matrix owned;
    Run run;
    const f3i_matrix* imputed = nullptr;
    f3i_matrix* tmp = nullptr;
    if (o.method == "f3i") {
        f3i_run* r = nullptr;
        check(f3i_run_create(x.get(), &cfg, &r));
        run.reset(r);
        imputed = f3i_run_imputed(run.get());
    } else if (o.method == "mean") {
        check(f3i_impute_mean(x.get(), &tmp));
    } else if (o.method == "knn-uniform") {
        check(f3i_impute_knn(x.get(), o.k, F3I_WEIGHT_UNIFORM, &tmp));
    } else if (o.method == "knn-distance") {
        check(f3i_impute_knn(x.get(), o.k, F3I_WEIGHT_DISTANCE, &tmp));
    } else {
        throw CliError("unknown method " + o.method);
    }
    if (tmp) {
        owned.reset(tmp);
        imputed = owned.get();
    }
    write_matrix(dir / "imputed.csv", input.header, imputed, false);
    manifest.output("imputed.csv");

    json metrics = {{"manifest", kManifest}, {"command", "impute"}, {"method", o.method}};
    if (run) {
        const std::size_t t = f3i_run_final_t(run.get()), k = f3i_run_k(run.get());
        std::vector<double> alphas(t * k), grads(t * k), gvals(t);
        check(f3i_run_alphas(run.get(), alphas.data()));
        check(f3i_run_gradients(run.get(), grads.data()));
        check(f3i_run_objective_values(run.get(), gvals.data()));
        json a = json::array(), g = json::array();
        for (std::size_t s = 0; s < t; ++s) {
            a.push_back(std::vector<double>(alphas.begin() + s * k, alphas.begin() + (s + 1) * k));
            g.push_back(std::vector<double>(grads.begin() + s * k, grads.begin() + (s + 1) * k));
        }
        json trace = {{"manifest", kManifest},
                      {"final_t", t},
                      {"stop_reason", stop_name(f3i_run_stop_reason(run.get()))},
                      {"bandwidth", f3i_run_bandwidth(run.get())},
                      {"k", k},
                      {"objective_values", gvals},
                      {"alphas", a},
                      {"gradients", g}};
        write_json(dir / "trace.json", trace);
        manifest.output("trace.json");
        metrics["t_final"] = t;
        metrics["stop_reason"] = stop_name(f3i_run_stop_reason(run.get()));
        metrics["bandwidth"] = f3i_run_bandwidth(run.get());
    }
    if (!o.truth.empty()) {
        manifest.input(o.truth);
        const Table truth_t = read_csv(o.truth);
        if (truth_t.rows != input.rows || truth_t.header.size() != input.header.size())
            throw CliError("truth shape differs from input");
        Matrix truth = load_matrix(truth_t);
        double v = 0.0;
        check(f3i_mse(imputed, truth.get(), &v));
        metrics["mse"] = v;
        metrics["rmse"] = std::sqrt(v);
        if (f3i_matrix_missing_count(x.get()) > 0) {
            check(f3i_masked_mse(imputed, truth.get(), x.get(), &v));
            metrics["masked_mse"] = v;
        }
    }
    write_json(dir / "metrics.json", metrics);
    manifest.output("metrics.json");
    manifest.config() = config_json(cfg);
    manifest.config()["method"] = o.method;
    manifest.write(o.seed);
    return 0;
}

int cmd_validate(const Options& o, bool p_given, bool iter_given) {
    f3i_trial_kind kind;
    if (o.check == "mse-bound")
        kind = F3I_TRIAL_MSE;
    else if (o.check == "regret-bound")
        kind = F3I_TRIAL_REGRET;
    else if (o.check == "joint-bound")
        kind = F3I_TRIAL_JOINT;
    else
        throw CliError("unknown check " + o.check);

    const fs::path dir = prepare_out(o.out);
    Manifest manifest("validate", dir);
    f3i_trial_setup setup = f3i_trial_setup_default();
    setup.n = o.n;
    setup.f = o.f;
    setup.sigma = o.sigma;
    setup.missingness.mechanism = parse_mechanism(o.mechanism);
    setup.missingness.p_miss = o.p_miss;
    setup.config = make_config(o);
    setup.joint = make_joint(o);
    if (kind == F3I_TRIAL_JOINT) {
        // Joint protocol defaults: half the cells missing, three rounds.
        if (!p_given) setup.missingness.p_miss = 0.5;
        if (!iter_given) setup.config.max_iter = 3;
    }

    std::vector<f3i_trial_result> results(o.runs);
    std::vector<std::string> errors(o.runs);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t r; (r = next.fetch_add(1)) < o.runs;) {
            if (f3i_validate_trial(kind, &setup, o.seed + r, &results[r]) != F3I_OK)
                errors[r] = f3i_last_error();
        }
    };
    const unsigned jobs = std::max(1u, std::min<unsigned>(o.jobs, static_cast<unsigned>(o.runs)));
    std::vector<std::thread> pool;
    for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (std::size_t r = 0; r < o.runs; ++r)
        if (!errors[r].empty()) throw CliError("run seed " + std::to_string(o.seed + r) + ": " + errors[r]);

    auto out = open_out(dir / "runs.csv");
    out << "seed,measured,bound,satisfied,t_final,stop_reason,c_miss,bandwidth,mse,missing_fraction\n";
    std::size_t satisfied = 0;
    double sum_measured = 0.0, sum_bound = 0.0;
    for (const auto& r : results) {
        out << r.seed << ',' << format_double(r.measured) << ',' << format_double(r.bound) << ','
            << r.satisfied << ',' << r.t_final << ',' << stop_name(r.stop_reason) << ','
            << format_double(r.c_miss) << ',' << format_double(r.bandwidth) << ',' << format_double(r.mse)
            << ',' << format_double(r.missing_fraction) << '\n';
        satisfied += r.satisfied;
        sum_measured += r.measured;
        sum_bound += r.bound;
    }
    out.close();
    const double runs = static_cast<double>(std::max<std::size_t>(o.runs, 1));
    json summary = {{"manifest", kManifest},
                    {"check", o.check},
                    {"runs", o.runs},
                    {"satisfied", satisfied},
                    {"mean_measured", sum_measured / runs},
                    {"mean_bound", sum_bound / runs}};
    write_json(dir / "summary.json", summary);
    manifest.config() = config_json(setup.config);
    manifest.config()["check"] = o.check;
    manifest.config()["runs"] = o.runs;
    manifest.config()["n"] = o.n;
    manifest.config()["f"] = o.f;
    manifest.config()["sigma"] = o.sigma;
    manifest.config()["mechanism"] = o.mechanism;
    manifest.config()["p_miss"] = setup.missingness.p_miss;
    manifest.output("runs.csv");
    manifest.output("summary.json");
    manifest.write(o.seed);
    std::cout << o.check << ": bound satisfied on " << satisfied << "/" << o.runs << " runs\n";
    return satisfied == o.runs ? 0 : 1;
}

int cmd_joint(const Options& o) {
    const Table features = read_csv(o.input);
    const Table labels_t = read_csv(o.labels);
    if (labels_t.rows != features.rows)
        throw CliError("labels have " + std::to_string(labels_t.rows) + " rows, features " +
                       std::to_string(features.rows));
    if (labels_t.header.size() != 1) throw CliError("labels file must have exactly one column");
    std::vector<int> labels;
    for (double v : labels_t.values) {
        if (v != 0.0 && v != 1.0) throw CliError("labels must be 0 or 1");
        labels.push_back(static_cast<int>(v));
    }
    const fs::path dir = prepare_out(o.out);
    Manifest manifest("joint", dir);
    manifest.input(o.input);
    manifest.input(o.labels);
    Matrix x = load_matrix(features);
    const f3i_config cfg = make_config(o);
    const f3i_joint_config jcfg = make_joint(o);
    f3i_joint* raw = nullptr;
    check(f3i_joint_train(x.get(), labels.data(), &cfg, &jcfg, &raw));
    Joint joint(raw);

    write_matrix(dir / "imputed.csv", features.header, f3i_joint_imputed(joint.get()), false);
    std::vector<double> omega(f3i_joint_dim(joint.get()));
    double bias = 0.0;
    check(f3i_joint_weights(joint.get(), omega.data(), &bias));
    write_json(dir / "model.json", {{"manifest", kManifest}, {"features", features.header}, {"omega", omega},
                                    {"bias", bias}});
    std::vector<std::size_t> sizes(3);
    for (int w = 0; w < 3; ++w) sizes[w] = f3i_joint_split_size(joint.get(), w);
    json metrics = {{"manifest", kManifest},
                    {"command", "joint"},
                    {"method", "f3i-pcgrad"},
                    {"t_final", f3i_joint_final_t(joint.get())},
                    {"n_train", sizes[0] + sizes[1]},
                    {"n_test", sizes[2]}};
    const double auc = f3i_joint_test_auc(joint.get());
    if (auc >= 0.0) metrics["auc"] = auc;
    write_json(dir / "metrics.json", metrics);
    manifest.config() = config_json(cfg);
    manifest.config()["beta"] = jcfg.beta;
    manifest.config()["epochs"] = jcfg.epochs;
    manifest.config()["classifier_lr"] = jcfg.classifier_lr;
    manifest.config()["loss"] = o.loss;
    manifest.config()["train_fraction"] = jcfg.train_fraction;
    manifest.config()["validation_fraction"] = jcfg.validation_fraction;
    for (const char* name : {"imputed.csv", "model.json", "metrics.json"}) manifest.output(name);
    manifest.write(o.seed);
    if (auc < 0.0) std::cerr << "warning: test split holds a single class, AUC omitted\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Iterative KNN imputation guided by density preservation"};
    app.require_subcommand(1);
    // "-h" stays free: --h is the bandwidth flag.
    app.set_help_flag("--help", "Print help and exit");
    Options o;

    auto data_flags = [&](CLI::App* c) {
        c->add_option("--n", o.n, "Rows")->check(CLI::PositiveNumber);
        c->add_option("--f", o.f, "Features")->check(CLI::PositiveNumber);
        c->add_option("--sigma", o.sigma, "Noise scale");
        c->add_option("--mechanism", o.mechanism, "mcar, mar or mnar-gsm")
            ->check(CLI::IsMember({"mcar", "mar", "mnar-gsm"}));
    };
    auto run_flags = [&](CLI::App* c) {
        c->add_option("--k", o.k, "Neighbors")->check(CLI::PositiveNumber);
        c->add_option("--max-iter", o.max_iter, "Iteration budget")->check(CLI::PositiveNumber);
        c->add_option("--eta", o.eta, "Weight penalty");
        c->set_help_flag("--help", "Print help and exit");
        c->add_option("--h", o.h, "Bandwidth override");
        c->add_flag("--normalize", o.normalize, "Work on unit-norm rows");
    };
    auto joint_flags = [&](CLI::App* c) {
        c->add_option("--beta", o.beta, "Classification weight in [0,1]");
        c->add_option("--epochs", o.epochs, "Alternation epochs");
        c->add_option("--lr", o.lr, "Classifier step size");
        c->add_option("--loss", o.loss, "bce or positive")->check(CLI::IsMember({"bce", "positive"}));
    };

    auto* gen = app.add_subcommand("generate", "Synthetic Gaussian data with missing cells");
    data_flags(gen);
    gen->add_option("--p-miss", o.p_miss, "Target missing fraction");
    gen->add_option("--seed", o.seed);
    gen->add_option("--out", o.out, "Output directory");

    auto* imp = app.add_subcommand("impute", "Fill missing cells of a CSV");
    imp->add_option("input", o.input, "CSV with empty cells as missing")->required()->check(CLI::ExistingFile);
    imp->add_option("--method", o.method)->check(CLI::IsMember({"f3i", "mean", "knn-uniform", "knn-distance"}));
    run_flags(imp);
    imp->add_option("--seed", o.seed);
    imp->add_option("--truth", o.truth, "Complete CSV for error metrics")->check(CLI::ExistingFile);
    imp->add_option("--out", o.out);

    auto* val = app.add_subcommand("validate", "Seeded bound-validation batch");
    val->add_option("check", o.check, "mse-bound, regret-bound or joint-bound")
        ->required()
        ->check(CLI::IsMember({"mse-bound", "regret-bound", "joint-bound"}));
    val->add_option("--runs", o.runs)->check(CLI::PositiveNumber);
    data_flags(val);
    auto* val_p = val->add_option("--p-miss", o.p_miss);
    run_flags(val);
    auto* val_iter = val->get_option("--max-iter");
    joint_flags(val);
    val->add_option("--seed", o.seed, "First seed");
    val->add_option("--jobs", o.jobs, "Parallel runs")->check(CLI::PositiveNumber);
    val->add_option("--out", o.out);

    auto* jnt = app.add_subcommand("joint", "Joint imputation and classification");
    jnt->add_option("input", o.input, "Feature CSV")->required()->check(CLI::ExistingFile);
    jnt->add_option("--labels", o.labels, "Single-column 0/1 CSV")->required()->check(CLI::ExistingFile);
    run_flags(jnt);
    joint_flags(jnt);
    jnt->add_option("--train-frac", o.train_frac);
    jnt->add_option("--val-frac", o.val_frac);
    jnt->add_option("--seed", o.seed);
    jnt->add_option("--out", o.out);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) return cmd_generate(o);
        if (*imp) return cmd_impute(o);
        if (*val) return cmd_validate(o, val_p->count() > 0, val_iter->count() > 0);
        if (*jnt) return cmd_joint(o);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
