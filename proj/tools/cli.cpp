#include "cli.hpp"

#include <algorithm>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "emob/battery.hpp"
#include "emob/error.hpp"
#include "emob/eval.hpp"
#include "emob/features.hpp"
#include "emob/io.hpp"
#include "emob/models.hpp"
#include "emob/physics.hpp"
#include "emob/synth.hpp"
#include "emob/telemetry.hpp"
#include "emob/tripmetrics.hpp"

namespace emob::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// TOML via CLI11, or a JSON object whose nested objects become sections.
// TOML or JSON manifest. Top-level keys belong to the subcommand being run;
// tables/objects named after a subcommand scope keys to it.
class ManifestConfig : public CLI::ConfigTOML {
public:
    explicit ManifestConfig(const CLI::App& app) : app_(app) {}

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override
    {
        std::string text{std::istreambuf_iterator<char>(input), std::istreambuf_iterator<char>()};
        const auto first = text.find_first_not_of(" \t\r\n");
        std::vector<CLI::ConfigItem> items;
        if (first == std::string::npos || text[first] != '{') {
            std::istringstream again(text);
            items = CLI::ConfigTOML::from_config(again);
        } else {
            json j;
            try {
                j = json::parse(text);
            } catch (const json::exception& e) {
                throw CLI::ConfigError(std::string("malformed JSON config: ") + e.what());
            }
            flatten(j, {}, items);
        }
        const auto used = app_.get_subcommands();
        if (!used.empty())
            for (auto& item : items)
                if (item.parents.empty() && item.name != "++" && item.name != "--")
                    item.parents.push_back(used.front()->get_name());
        return items;
    }

private:
    const CLI::App& app_;

    static std::string scalar(const json& v)
    {
        if (v.is_string())
            return v.get<std::string>();
        if (v.is_boolean())
            return v.get<bool>() ? "true" : "false";
        if (v.is_number_float())
            return format_double(v.get<double>());
        return v.dump();
    }

    static void flatten(const json& obj, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& out)
    {
        for (const auto& [key, value] : obj.items()) {
            if (value.is_object()) {
                auto p = parents;
                p.push_back(key);
                flatten(value, p, out);
                continue;
            }
            CLI::ConfigItem item;
            item.parents = parents;
            item.name = key;
            if (value.is_array())
                for (const auto& v : value)
                    item.inputs.push_back(scalar(v));
            else
                item.inputs.push_back(scalar(value));
            out.push_back(std::move(item));
        }
    }
};

json read_json(const fs::path& path)
{
    const auto text = read_text_file(path);
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, "'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

void emit(const std::string& out, const std::string& content, std::ostream& stdout_)
{
    if (out.empty() || out == "-")
        stdout_ << content;
    else
        write_file_atomic(out, content);
}

void emit_json(const std::string& out, const json& j, std::ostream& stdout_) { emit(out, j.dump(2) + "\n", stdout_); }

std::vector<TripRecord> read_records(const std::vector<std::string>& paths)
{
    std::vector<TripRecord> records;
    for (const auto& p : paths) {
        try {
            auto batch = trip_records_from_json(read_json(p));
            records.insert(records.end(), batch.begin(), batch.end());
        } catch (const Error& e) {
            if (e.code() == ErrorCode::Io)
                throw;
            throw Error(e.code(), p + ": " + e.detail());
        }
    }
    return records;
}

// Physics flags layered over an optional JSON block.
struct PhysicsFlags {
    std::string json_path;
    std::optional<double> g, cr, rho, area, cd, ebike_mass, escooter_mass;

    void add_to(CLI::App& app)
    {
        app.add_option("--physics-json", json_path, "Physics constants as JSON {g, rolling_coefficient, ...}");
        app.add_option("--g", g, "Gravitational acceleration [m/s^2] (default 9.81)");
        app.add_option("--cr", cr, "Rolling resistance coefficient C_r [-] (default 0.001)");
        app.add_option("--rho", rho, "Air density [kg/m^3] (default 1.29)");
        app.add_option("--area", area, "Frontal area of device and rider [m^2] (default 0.5)");
        app.add_option("--cd", cd, "Drag coefficient C_d [-] (default 0.7)");
        app.add_option("--ebike-mass-kg", ebike_mass, "E-bike device mass [kg] (default 25)");
        app.add_option("--escooter-mass-kg", escooter_mass, "E-scooter device mass [kg] (default 14.2)");
    }

    PhysicsParams params() const
    {
        PhysicsParams p;
        if (!json_path.empty())
            p = physics_params_from_json(read_json(json_path), p);
        if (g) p.g = *g;
        if (cr) p.rolling_coefficient = *cr;
        if (rho) p.air_density = *rho;
        if (area) p.frontal_area = *area;
        if (cd) p.drag_coefficient = *cd;
        validate(p);
        return p;
    }

    DeviceMasses masses() const
    {
        DeviceMasses m;
        if (ebike_mass) m.ebike_kg = *ebike_mass;
        if (escooter_mass) m.escooter_kg = *escooter_mass;
        if (!(m.ebike_kg >= 0.0) || !(m.escooter_kg >= 0.0))
            throw Error(ErrorCode::InvalidArgument, "device masses must be non-negative");
        return m;
    }
};

// "kind.key=value", or "key=value" when a default kind is known.
void apply_overrides(Hyperparams& hp, const std::vector<std::string>& overrides, std::optional<ModelKind> fallback)
{
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::InvalidArgument, "hyperparameter override '" + o + "' is not key=value");
        std::string key = o.substr(0, eq);
        const std::string value = o.substr(eq + 1);
        std::optional<ModelKind> kind = fallback;
        if (const auto dot = key.find('.'); dot != std::string::npos) {
            kind = parse_model_kind(key.substr(0, dot));
            key = key.substr(dot + 1);
        }
        if (!kind)
            throw Error(ErrorCode::InvalidArgument, "override '" + o + "' needs a model prefix, e.g. gb.n_trees=50");
        set_hyperparam(hp, *kind, key, value);
    }
    validate(hp);
}

std::string predictions_csv(const Eigen::VectorXd& pred, const Eigen::VectorXd* labels)
{
    std::string out = labels ? "prediction_wh_per_km,label_wh_per_km\n" : "prediction_wh_per_km\n";
    for (Eigen::Index i = 0; i < pred.size(); ++i) {
        out += format_double(pred(i));
        if (labels)
            out += "," + format_double((*labels)(i));
        out += '\n';
    }
    return out;
}

struct Context {
    std::ostream& out;
    std::ostream& err;
};

// ---------------------------------------------------------------------------

struct IngestArgs {
    std::string input, kind = "ebike", out, align_soc;
    std::optional<double> assist, v_start, v_end, odometer;
    std::vector<double> height, weight;
};

void cmd_ingest(const IngestArgs& a, Context& ctx)
{
    auto trace = parse_trip_csv(a.input, parse_vehicle_kind(a.kind));
    if (!a.align_soc.empty())
        trace = align_soc_events(trace, parse_soc_events(a.align_soc));
    trace.assist_level = a.assist;
    trace.odometer_km = a.odometer;
    if (a.v_start.has_value() != a.v_end.has_value())
        throw Error(ErrorCode::InvalidArgument, "--v-start and --v-end go together");
    if (a.v_start)
        trace.voltage_endpoints = VoltageEndpoints{*a.v_start, *a.v_end};
    if (!a.height.empty() || !a.weight.empty()) {
        if (a.height.size() != 2 || a.weight.size() != 2)
            throw Error(ErrorCode::InvalidArgument, "rider needs both --height-cm LO HI and --weight-kg LO HI");
        trace.rider = RiderProfile{{a.height[0], a.height[1]}, {a.weight[0], a.weight[1]}};
    }
    check_trace(trace);
    for (const auto& w : validate_trace(trace))
        ctx.err << "warning: " << to_string(w.kind) << " at sample " << w.index << ": " << w.message << '\n';
    emit_json(a.out, to_json(trace), ctx.out);
}

struct LabelArgs {
    std::vector<std::string> traces;
    std::string ocv, out;
    std::optional<double> capacity;
    std::size_t window = kDefaultSmoothingWindow;
};

void cmd_label(const LabelArgs& a, Context& ctx)
{
    LabelOptions opt;
    opt.smoothing_window = a.window;
    if (!a.ocv.empty())
        opt.ocv = ocv_curve_from_json(read_json(a.ocv));
    json records = json::array();
    for (const auto& path : a.traces) {
        const auto trace = trace_from_json(read_json(path));
        if (a.capacity) {
            BatterySpec spec = trace.kind == VehicleKind::ebike ? kEbikeBattery : kEscooterBattery;
            spec.capacity_wh = *a.capacity;
            opt.battery = spec;
        }
        try {
            records.push_back(to_json(label_trip(trace, opt)));
        } catch (const Error& e) {
            throw Error(e.code(), path + ": " + e.detail());
        }
    }
    emit_json(a.out, records.size() == 1 ? records[0] : records, ctx.out);
}

struct FitOcvArgs {
    std::string points, out;
    int cells = 1;
};

void cmd_fit_ocv(const FitOcvArgs& a, Context& ctx)
{
    const auto pts = parse_ocv_points(a.points);
    emit_json(a.out, to_json(fit_ocv(pts, a.cells)), ctx.out);
}

struct DatasetArgs {
    std::vector<std::string> records;
    std::string out;
    bool no_rider = false;
};

void cmd_dataset(const DatasetArgs& a, Context& ctx)
{
    const auto records = read_records(a.records);
    const auto ds = build_dataset(records, !a.no_rider);
    save_dataset(ds, a.out);
    ctx.out << "wrote " << ds.features.rows() << " rows x " << ds.features.cols() << " features to " << a.out
            << " (schema " << ds.schema.fingerprint() << ")\n";
}

struct TrainArgs {
    std::string data, model = "gb", out;
    std::uint64_t seed = 0;
    std::vector<std::string> hp;
    bool all_rows = false;
};

void cmd_train(const TrainArgs& a, Context& ctx)
{
    const auto ds = load_dataset(a.data);
    const auto kind = parse_model_kind(a.model);
    Hyperparams hp;
    apply_overrides(hp, a.hp, kind);

    TrainContext tc;
    tc.schema_fingerprint = ds.schema.fingerprint();
    TrainedModel model;
    if (a.all_rows) {
        model = train(kind, ds.features, ds.labels, hp, a.seed, tc);
    } else {
        const auto part = split(ds.features.rows(), SplitSpec{.seed = a.seed});
        const Eigen::MatrixXd xtr = ds.features(part.train, Eigen::all);
        const Eigen::VectorXd ytr = ds.labels(part.train);
        tc.validation_features = ds.features(part.val, Eigen::all);
        tc.validation_labels = ds.labels(part.val);
        model = train(kind, xtr, ytr, hp, a.seed, tc);
        const Eigen::MatrixXd xte = ds.features(part.test, Eigen::all);
        const Eigen::VectorXd yte = ds.labels(part.test);
        const double test_mae = mae(predict_batch(model, xte, tc.schema_fingerprint), yte);
        ctx.out << to_string(kind) << " train=" << part.train.size() << " val=" << part.val.size()
                << " test=" << part.test.size() << " test_mae_wh_per_km=" << format_double(test_mae) << '\n';
    }
    save_model(model, a.out);
}

struct EvalArgs {
    std::vector<std::string> records;
    std::vector<std::string> models;
    std::string report, table;
    std::uint64_t seed = 0;
    std::vector<std::string> hp;
    bool no_physics = false;
    PhysicsFlags physics;
};

void cmd_eval(const EvalArgs& a, Context& ctx)
{
    const auto records = read_records(a.records);
    ExperimentOptions opt;
    if (!a.models.empty()) {
        opt.kinds.clear();
        for (const auto& m : a.models)
            opt.kinds.push_back(parse_model_kind(m));
    }
    apply_overrides(opt.hyper, a.hp, opt.kinds.size() == 1 ? std::optional(opt.kinds[0]) : std::nullopt);
    opt.model_seed = a.seed;
    opt.physics = a.physics.params();
    opt.masses = a.physics.masses();
    opt.include_physics = !a.no_physics;
    const auto report = run_grid(records, opt, SplitSpec{.seed = a.seed});
    const auto table = format_table(report);
    if (!a.report.empty())
        write_file_atomic(a.report, to_json(report).dump(2) + "\n");
    if (!a.table.empty())
        write_file_atomic(a.table, table);
    ctx.out << table;
}

struct PredictArgs {
    std::string model, data, schema, out;
    std::vector<std::string> records;
};

void cmd_predict(const PredictArgs& a, Context& ctx)
{
    const auto model = load_model(a.model);
    if (!a.data.empty()) {
        const auto ds = load_dataset(a.data);
        const auto pred = predict_batch(model, ds.features, ds.schema.fingerprint());
        emit(a.out, predictions_csv(pred, &ds.labels), ctx.out);
        return;
    }
    if (a.records.empty() || a.schema.empty())
        throw Error(ErrorCode::InvalidArgument, "predict needs --data, or --records together with --schema");
    const auto schema = feature_schema_from_json(read_json(a.schema));
    const auto records = read_records(a.records);
    const auto ds = encode_records(records, schema, UnknownTokenPolicy::reserved_code);
    emit(a.out, predictions_csv(predict_batch(model, ds.features, schema.fingerprint()), nullptr), ctx.out);
}

struct BaselineArgs {
    std::vector<std::string> records;
    std::string out;
    PhysicsFlags physics;
};

void cmd_baseline(const BaselineArgs& a, Context& ctx)
{
    const auto records = read_records(a.records);
    if (records.empty())
        throw Error(ErrorCode::EmptyDataset, "no records");
    const auto p = a.physics.params();
    const auto m = a.physics.masses();
    Eigen::VectorXd pred(static_cast<Eigen::Index>(records.size()));
    Eigen::VectorXd labels(pred.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        pred(static_cast<Eigen::Index>(i)) = physics_predict(records[i], p, m);
        labels(static_cast<Eigen::Index>(i)) = records[i].label_wh_per_km;
    }
    emit(a.out, predictions_csv(pred, &labels), ctx.out);
    ctx.err << "mathematical model mae_wh_per_km=" << format_double(mae(pred, labels)) << '\n';
}

struct SynthArgs {
    std::string data, out, copula;
    Eigen::Index n = 10000;
    std::uint64_t seed = 0;
};

void cmd_synth(const SynthArgs& a, Context& ctx)
{
    const auto ds = load_dataset(a.data);
    const Eigen::Index d = ds.features.cols();
    Eigen::MatrixXd real(ds.features.rows(), d + 1);
    real << ds.features, ds.labels;
    auto names = ds.schema.names;
    names.emplace_back(kLabelColumn);

    const auto copula = fit_copula(real, names);
    const Eigen::MatrixXd synthetic = sample(copula, a.n, a.seed);
    const auto q = quality_breakdown(real, synthetic);

    Dataset out{synthetic.leftCols(d), synthetic.col(d), ds.schema};
    save_dataset(out, a.out);
    if (!a.copula.empty())
        write_file_atomic(a.copula, to_json(copula).dump(2) + "\n");
    ctx.out << "wrote " << a.n << " synthetic rows to " << a.out << '\n'
            << "quality_score=" << format_double(q.score) << " mean_ks=" << format_double(q.mean_ks)
            << " mean_correlation_gap=" << format_double(q.mean_correlation_gap) << '\n';
}

struct PlotArgs {
    std::string trace, out;
};

void cmd_plot(const PlotArgs& a, Context& ctx)
{
    const auto trace = trace_from_json(read_json(a.trace));
    const auto files = render_trip_plot(trace);
    if (!files.has_soc)
        ctx.err << "warning: trace has no soc readings; plotting speed only\n";
    fs::path base{a.out};
    auto svg = base, csv = base;
    svg.replace_extension(".svg");
    csv.replace_extension(".csv");
    write_file_atomic(svg, files.svg);
    write_file_atomic(csv, files.csv);
    ctx.out << "wrote " << svg.string() << " and " << csv.string() << '\n';
}


} // namespace

int run(const std::vector<std::string>& args)
{
    CLI::App app{"E-bike / e-scooter energy efficiency toolkit", "emob"};
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML or JSON manifest of flag values; explicit flags win");
    app.config_formatter(std::make_shared<ManifestConfig>(app));
    app.fallthrough();

    IngestArgs ingest;
    auto* s_ingest = app.add_subcommand("ingest", "Parse a trip CSV into a canonical trace JSON");
    s_ingest->add_option("input", ingest.input, "Trip CSV")->required();
    s_ingest->add_option("--kind", ingest.kind, "Vehicle kind: ebike | escooter");
    s_ingest->add_option("--out", ingest.out, "Trace JSON output (stdout if omitted)");
    s_ingest->add_option("--align-soc", ingest.align_soc, "CSV of timestamp,soc [%] events to align onto samples");
    s_ingest->add_option("--assist-level", ingest.assist, "E-bike assistance level [0-1]");
    s_ingest->add_option("--v-start", ingest.v_start, "Battery voltage at trip start [V]");
    s_ingest->add_option("--v-end", ingest.v_end, "Battery voltage at trip end [V]");
    s_ingest->add_option("--odometer-km", ingest.odometer, "Odometer trip distance [km]");
    s_ingest->add_option("--height-cm", ingest.height, "Rider height range LO HI [cm]")->expected(2);
    s_ingest->add_option("--weight-kg", ingest.weight, "Rider weight range LO HI [kg]")->expected(2);

    LabelArgs label;
    auto* s_label = app.add_subcommand("label", "Summarize traces into labelled trip records [Wh/km]");
    s_label->add_option("traces", label.traces, "Trace JSON files")->required();
    s_label->add_option("--ocv", label.ocv, "OCV curve JSON for e-bike voltage endpoints");
    s_label->add_option("--capacity-wh", label.capacity, "Battery capacity [Wh] (default 450 e-bike, 446 e-scooter)");
    s_label->add_option("--window", label.window, "Altitude smoothing window [samples]");
    s_label->add_option("--out", label.out, "Record JSON output (stdout if omitted)");

    FitOcvArgs fit;
    auto* s_fit = app.add_subcommand("fit-ocv", "Fit the open-circuit voltage curve to (soc, V) points");
    s_fit->add_option("points", fit.points, "CSV with header soc,voltage (soc fraction, cell voltage [V])")
        ->required();
    s_fit->add_option("--cells", fit.cells, "Cells in series [-]");
    s_fit->add_option("--out", fit.out, "Curve JSON output (stdout if omitted)");

    DatasetArgs dataset;
    auto* s_dataset = app.add_subcommand("dataset", "Encode trip records into a feature matrix CSV + schema");
    s_dataset->add_option("records", dataset.records, "Record JSON files")->required();
    s_dataset->add_flag("--no-rider", dataset.no_rider, "Drop rider height/weight midpoint columns");
    s_dataset->add_option("--out", dataset.out, "Dataset CSV; schema goes to <out>.schema.json")->required();

    TrainArgs trainargs;
    auto* s_train = app.add_subcommand("train", "Train one model on a dataset (8:1:1 split)");
    s_train->add_option("--data", trainargs.data, "Dataset CSV")->required();
    s_train->add_option("--model", trainargs.model, "Model: lr | svr | knn | dt | rf | gb | mlp");
    s_train->add_option("--seed", trainargs.seed, "Split and model seed")->required();
    s_train->add_option("--hp", trainargs.hp, "Hyperparameter override key=value, e.g. n_trees=50");
    s_train->add_flag("--all-rows", trainargs.all_rows, "Train on every row, no held-out split");
    s_train->add_option("--out", trainargs.out, "Model JSON output")->required();

    EvalArgs evalargs;
    auto* s_eval = app.add_subcommand("eval", "MAE grid [Wh/km] over models, vehicles and rider features");
    s_eval->add_option("records", evalargs.records, "Record JSON files")->required();
    s_eval->add_option("--models", evalargs.models, "Models to compare (default all)")->delimiter(',');
    s_eval->add_option("--seed", evalargs.seed, "Split and model seed")->required();
    s_eval->add_option("--hp", evalargs.hp, "Hyperparameter override kind.key=value, e.g. gb.n_trees=50");
    s_eval->add_option("--report", evalargs.report, "JSON report output");
    s_eval->add_option("--table", evalargs.table, "Plain-text table output");
    s_eval->add_flag("--no-physics", evalargs.no_physics, "Skip the mathematical model row");
    evalargs.physics.add_to(*s_eval);

    PredictArgs pred;
    auto* s_predict = app.add_subcommand("predict", "Predict energy efficiency [Wh/km] with a trained model");
    s_predict->add_option("--model", pred.model, "Model JSON")->required();
    s_predict->add_option("--data", pred.data, "Dataset CSV with schema sidecar");
    s_predict->add_option("--records", pred.records, "Record JSON files");
    s_predict->add_option("--schema", pred.schema, "Schema JSON for --records");
    s_predict->add_option("--out", pred.out, "Predictions CSV (stdout if omitted)");

    BaselineArgs base;
    auto* s_base = app.add_subcommand("baseline", "Mathematical model predictions [Wh/km] for trip records");
    s_base->add_option("records", base.records, "Record JSON files")->required();
    s_base->add_option("--out", base.out, "Predictions CSV (stdout if omitted)");
    base.physics.add_to(*s_base);

    SynthArgs synth;
    auto* s_synth = app.add_subcommand("synth", "Gaussian-copula synthetic dataset");
    s_synth->add_option("--data", synth.data, "Real dataset CSV")->required();
    s_synth->add_option("--n", synth.n, "Rows to generate")->check(CLI::PositiveNumber);
    s_synth->add_option("--seed", synth.seed, "Sampling seed")->required();
    s_synth->add_option("--out", synth.out, "Synthetic dataset CSV")->required();
    s_synth->add_option("--copula", synth.copula, "Also write the fitted copula JSON here");

    PlotArgs plot;
    auto* s_plot = app.add_subcommand("plot", "Speed [km/h] and SoC [%] against elapsed time [s]");
    s_plot->add_option("trace", plot.trace, "Trace JSON")->required();
    s_plot->add_option("--out", plot.out, "Output base path; writes <out>.svg and <out>.csv")->required();

    std::vector<std::string> argv(args.rbegin(), args.rend());
    try {
        app.parse(argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::FileError& e) {
        app.exit(e);
        return kExitIo;
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    Context ctx{std::cout, std::cerr};
    try {
        if (*s_ingest) cmd_ingest(ingest, ctx);
        else if (*s_label) cmd_label(label, ctx);
        else if (*s_fit) cmd_fit_ocv(fit, ctx);
        else if (*s_dataset) cmd_dataset(dataset, ctx);
        else if (*s_train) cmd_train(trainargs, ctx);
        else if (*s_eval) cmd_eval(evalargs, ctx);
        else if (*s_predict) cmd_predict(pred, ctx);
        else if (*s_base) cmd_baseline(base, ctx);
        else if (*s_synth) cmd_synth(synth, ctx);
        else if (*s_plot) cmd_plot(plot, ctx);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.code() == ErrorCode::Io ? kExitIo : kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    }
    return kExitOk;
}

int run(int argc, const char* const* argv)
{
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i)
        args.emplace_back(argv[i]);
    return run(args);
}

} // namespace emob::cli
