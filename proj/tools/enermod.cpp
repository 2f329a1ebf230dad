// enermod: benchmark generation, oracle campaigns, model fitting,
// estimation, validation, sweeps and mapping exploration.

#include <algorithm>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "enermod/enermod.hpp"

namespace fs = std::filesystem;
using namespace enermod;

namespace {

struct Common {
    std::string outdir;
    std::string config_path;
    std::string isa_path;
    std::string api_path;
    std::string params_path;
    unsigned workers = 1;
    uint64_t seed = 0;
};

struct Inputs {
    SystemConfig config;
    std::shared_ptr<const Isa> isa;
    ApiDescription api;
    OracleParams params;
};

Inputs load_inputs(const Common& c) {
    Inputs in;
    in.config = c.config_path.empty() ? SystemConfig{} : load_config(c.config_path);
    in.config.validate();
    in.isa = std::make_shared<const Isa>(c.isa_path.empty() ? default_isa() : load_isa(c.isa_path, in.config.vliw_slots));
    in.isa->validate(in.config.vliw_slots);
    in.api = c.api_path.empty() ? default_api() : load_api(c.api_path, in.config);
    in.api.validate(in.config);
    in.params = c.params_path.empty() ? default_oracle_params() : load_oracle_params(c.params_path);
    return in;
}

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::generic, "cannot write " + path.string());
    out << content;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

ClusterCoord parse_coord(const std::string& s) {
    auto comma = s.find(',');
    if (comma == std::string::npos) throw ParseError("coordinate '" + s + "' must be x,y");
    try {
        return {static_cast<uint32_t>(std::stoul(s.substr(0, comma))), static_cast<uint32_t>(std::stoul(s.substr(comma + 1)))};
    } catch (const std::exception&) {
        throw ParseError("coordinate '" + s + "' must be x,y");
    }
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(cur);
    return out;
}

std::vector<DataPattern> parse_patterns(const std::string& s) {
    if (s == "all") return all_patterns();
    std::vector<DataPattern> out;
    for (const auto& p : split(s, ',')) out.push_back(parse_pattern(p));
    return out;
}

// Provenance timestamp; SOURCE_DATE_EPOCH pins it for reproducible builds.
std::string fit_date() {
    std::time_t t = std::time(nullptr);
    if (const char* e = std::getenv("SOURCE_DATE_EPOCH")) t = static_cast<std::time_t>(std::strtoll(e, nullptr, 10));
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

// ---------------------------------------------------------------------------
// Manifest

struct ManifestRow {
    std::string name, kind, swept, value, program, prologue;
    uint32_t reps = 1;
};

const char* kManifestHeader = "name,kind,swept,value,program,prologue,reps";

std::string manifest_csv(const std::vector<ManifestRow>& rows) {
    std::string out = std::string(kManifestHeader) + "\n";
    for (const auto& r : rows)
        out += r.name + "," + r.kind + "," + r.swept + "," + r.value + "," + r.program + "," + r.prologue + "," +
               std::to_string(r.reps) + "\n";
    return out;
}

std::vector<ManifestRow> read_manifest(const std::string& path) {
    std::istringstream in(detail::read_file(path));
    std::string line;
    std::vector<ManifestRow> rows;
    if (!std::getline(in, line) || line != kManifestHeader) throw ParseError("manifest: bad header in " + path);
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto f = split(line, ',');
        if (line.back() == ',') f.push_back("");
        if (f.size() != 7) throw ParseError("manifest line " + std::to_string(lineno) + ": expected 7 fields");
        ManifestRow r{f[0], f[1], f[2], f[3], f[4], f[5], 1};
        try {
            r.reps = static_cast<uint32_t>(std::stoul(f[6]));
        } catch (const std::exception&) {
            throw ParseError("manifest line " + std::to_string(lineno) + ": bad reps");
        }
        rows.push_back(r);
    }
    return rows;
}

std::vector<Microbenchmark> load_manifest_benchmarks(const std::string& manifest, const Inputs& in) {
    auto rows = read_manifest(manifest);
    fs::path base = fs::path(manifest).parent_path();
    std::vector<Microbenchmark> out;
    for (const auto& r : rows) {
        fs::path p = base / r.program;
        auto doc = detail::parse_json_text(detail::read_file(p.string()), p.string());
        auto b = benchmark_from_json(doc, in.isa, in.config);
        validate_program(in.config, b.program);
        out.push_back(std::move(b));
    }
    return out;
}

void write_benchmarks(const fs::path& dir, const std::vector<Microbenchmark>& benches) {
    std::vector<ManifestRow> rows;
    for (const auto& b : benches) {
        std::string file = b.name + ".json";
        write_file(dir / file, dump(to_json(b)));
        rows.push_back({b.name, b.kind, b.dimension, b.value, file, b.prologue, b.reps});
    }
    write_file(dir / "manifest.csv", manifest_csv(rows));
}

ModelFunction load_function(const std::string& name_or_path) {
    for (const auto& n : standard_function_names())
        if (n == name_or_path) return standard_function(name_or_path);
    auto doc = detail::parse_json_text(detail::read_file(name_or_path), name_or_path);
    return function_from_json(doc, fs::path(name_or_path).stem().string());
}

// ---------------------------------------------------------------------------
// Subcommands

struct GenBenchArgs {
    std::string kind = "instr";
    std::string patterns = "all";
    uint32_t reps = 64;
    std::string group = "NOP,NOP";
    uint32_t lo = 0, hi = 799;
    std::string src = "0,0", dst = "1,1";
    std::optional<uint32_t> min, max, step;
    bool window = false;
    uint32_t states = 4;
};

int cmd_gen_bench(const Common& c, const GenBenchArgs& a) {
    Inputs in = load_inputs(c);
    BenchOptions bo;
    bo.reps = a.reps;
    CommOptions co;
    co.reps = a.reps;
    co.center_window_only = a.window;
    if (a.min || a.max || a.step) {
        const ApiOperation* send = in.api.find("send");
        SizeRange r = send && send->size ? *send->size : SizeRange{};
        if (a.min) r.min = *a.min;
        if (a.max) r.max = *a.max;
        if (a.step) r.step = *a.step;
        co.sizes = r;
    }
    fs::path dir = fs::path(c.outdir) / "benchmarks";
    std::vector<Microbenchmark> benches;
    auto add_prologues = [&](std::vector<Microbenchmark>& v, const std::vector<DataPattern>& pats, uint32_t cpu) {
        for (DataPattern p : pats) v.push_back(gen_prologue_benchmark(in.isa, in.config, p, cpu));
    };
    if (a.kind == "instr") {
        auto pats = parse_patterns(a.patterns);
        add_prologues(benches, pats, bo.cpu);
        auto v = gen_instruction_benchmarks(in.isa, in.config, pats, bo);
        benches.insert(benches.end(), v.begin(), v.end());
    } else if (a.kind == "position") {
        auto pats = parse_patterns(a.patterns);
        auto g = parse_group(split(a.group, ','), *in.isa, in.config.vliw_slots);
        add_prologues(benches, {pats.front()}, bo.cpu);
        auto v = gen_position_benchmarks(in.isa, in.config, g, a.lo, a.hi, pats.front(), bo);
        benches.insert(benches.end(), v.begin(), v.end());
    } else if (a.kind == "comm") {
        ClusterCoord s = parse_coord(a.src), d = parse_coord(a.dst);
        auto v = gen_comm_benchmarks(in.api, in.isa, in.config, s, d, co);
        add_prologues(benches, {DataPattern::zeros}, in.config.cpu_id(s, 0));
        benches.insert(benches.end(), v.begin(), v.end());
    } else if (a.kind == "local") {
        ClusterCoord s = parse_coord(a.src);
        auto v = gen_local_comm_benchmarks(in.api, in.isa, in.config, s, co);
        add_prologues(benches, {DataPattern::zeros}, in.config.cpu_id(s, 0));
        benches.insert(benches.end(), v.begin(), v.end());
    } else if (a.kind == "idle") {
        benches.push_back(gen_idle_benchmark(in.isa, bo));
    } else if (a.kind == "sync") {
        add_prologues(benches, {DataPattern::zeros}, bo.cpu);
        benches.push_back(gen_sync_benchmark(in.isa, in.config, bo));
    } else if (a.kind == "training") {
        TrainingOptions to;
        to.bench = bo;
        benches = training_benchmarks(in.api, in.isa, in.config, to);
    } else if (a.kind == "apps") {
        benches = reference_applications(in.config, in.isa, c.seed);
    } else if (a.kind == "transition") {
        auto tb = gen_transition_benchmarks(a.states);
        std::string csv = "name,states\n";
        for (const auto& t : tb) {
            std::string seq;
            for (size_t i = 0; i < t.states.size(); ++i) seq += (i ? " " : "") + std::to_string(t.states[i]);
            csv += t.name + "," + seq + "\n";
        }
        write_file(dir / "transitions.csv", csv);
        std::cout << tb.size() << " transition benchmarks\n";
        return 0;
    } else {
        throw Error(ErrorCode::usage, "unknown benchmark kind '" + a.kind + "'");
    }
    write_benchmarks(dir, benches);
    std::cout << benches.size() << " benchmarks written to " << dir.string() << "\n";
    return 0;
}

int cmd_oracle(const Common& c, const std::string& manifest_arg) {
    std::string manifest = manifest_arg.empty() ? (fs::path(c.outdir) / "benchmarks" / "manifest.csv").string() : manifest_arg;
    // every input is read and checked before anything is written
    Inputs in = load_inputs(c);
    auto benches = load_manifest_benchmarks(manifest, in);
    auto results = run_campaign(benches, in.config, in.params, c.workers);
    fs::path out(c.outdir);
    std::string summary = "name,total_pj,cycles\n";
    for (size_t i = 0; i < benches.size(); ++i) {
        write_file(out / "traces" / (benches[i].name + ".trace"), trace_to_string(results[i].trace));
        write_file(out / "ledgers" / (benches[i].name + ".csv"), ledger_to_csv(results[i].ledger));
        summary += benches[i].name + "," + format_double(results[i].ledger.total) + "," +
                   std::to_string(results[i].trace.duration()) + "\n";
    }
    write_file(out / "reports" / "campaign.csv", summary);
    std::cout << benches.size() << " benchmarks simulated\n";
    return 0;
}

std::vector<SimResult> load_campaign_results(const fs::path& outdir, const std::vector<Microbenchmark>& benches) {
    std::vector<SimResult> results(benches.size());
    for (size_t i = 0; i < benches.size(); ++i) {
        fs::path tp = outdir / "traces" / (benches[i].name + ".trace");
        fs::path lp = outdir / "ledgers" / (benches[i].name + ".csv");
        std::istringstream ts(detail::read_file(tp.string()));
        results[i].trace = read_trace(ts);
        results[i].ledger = ledger_from_csv(detail::read_file(lp.string()));
    }
    return results;
}

std::string residual_csv(const FitReport& r) {
    std::string out = "observation,residual_pj\n";
    for (size_t i = 0; i < r.names.size(); ++i) out += r.names[i] + "," + format_double(r.residuals[i]) + "\n";
    return out;
}

json report_json(const FitReport& r) {
    return json{{"observations", r.names.size()}, {"max_abs_error_pj", r.max_abs_error}, {"mean_rel_error", r.mean_rel_error},
                {"unknowns", r.unknowns},         {"rank", r.rank},                     {"rank_deficient", r.rank_deficient},
                {"negative_keys", r.negative_keys}, {"absent_keys", r.absent_keys}};
}

struct FitArgs {
    std::string manifest;
    std::string function = "fine";
    std::string out;
    bool no_subtract = false;
    bool include_setup = false;
    std::string noc_reducer = "none";
    size_t window = 16;
};

int cmd_fit(const Common& c, const FitArgs& a) {
    Inputs in = load_inputs(c);
    fs::path outdir(c.outdir);
    std::string manifest = a.manifest.empty() ? (outdir / "benchmarks" / "manifest.csv").string() : a.manifest;
    ModelFunction f = load_function(a.function);
    auto benches = load_manifest_benchmarks(manifest, in);
    auto results = load_campaign_results(outdir, benches);
    ObservationOptions oo;
    oo.subtract_prologue = !a.no_subtract;
    oo.include_prologues = a.include_setup;
    auto obs = build_observations(benches, results, f, oo);
    FitOptions fo;
    fo.clock_hz = in.config.clock_hz;
    FitResult fit = fit_constants(obs, f, fo);
    if (a.noc_reducer != "none") {
        ReducerOptions ro;
        ro.kind = parse_reducer_kind(a.noc_reducer);
        ro.flit_bytes = in.config.flit_payload_bytes;
        ro.window = a.window;
        fit.model = fit_noc_reducers(fit.model, ro).model;
    }
    fit.model.provenance["fit_date"] = fit_date();
    std::string stem = f.name;
    fs::path model_path = a.out.empty() ? outdir / "models" / (stem + ".json") : fs::path(a.out);
    write_file(model_path, serialize_model(fit.model));
    write_file(outdir / "reports" / ("fit_" + stem + "_residuals.csv"), residual_csv(fit.report));
    write_file(outdir / "reports" / ("fit_" + stem + "_summary.json"), dump(report_json(fit.report)));
    std::cout << "fitted " << fit.model.constants.size() << " constants from " << obs.size() << " observations, max error "
              << format_double(fit.report.max_abs_error) << " pJ" << (fit.report.rank_deficient ? " (rank deficient)" : "")
              << "\n";
    return 0;
}

int cmd_reduce(const Common& c, const std::string& model_path, const std::string& kind, size_t window, std::string out) {
    Inputs in = load_inputs(c);
    EnergyModel m = load_model(model_path);
    json summary;
    if (kind == "hops") {
        auto r = reduce_noc_model(m);
        for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
        summary = json{{"kind", kind}, {"keys_before", m.constants.size()}, {"keys_after", r.model.constants.size()}};
        m = std::move(r.model);
    } else {
        ReducerOptions ro;
        ro.kind = parse_reducer_kind(kind);
        ro.flit_bytes = in.config.flit_payload_bytes;
        ro.window = window;
        auto r = fit_noc_reducers(m, ro);
        json fams = json::object();
        for (const auto& [fam, lf] : r.fits)
            fams[fam] = {{"a", lf.reducer.a}, {"b", lf.reducer.b}, {"max_abs_error_pj", lf.report.max_abs_error}};
        summary = json{{"kind", kind}, {"keys_before", m.constants.size()}, {"keys_after", r.model.constants.size()},
                       {"families", fams}};
        m = std::move(r.model);
    }
    if (out.empty()) out = model_path;
    write_file(out, serialize_model(m));
    write_file(fs::path(c.outdir) / "reports" / ("reduce_" + kind + "_summary.json"), dump(summary));
    std::cout << summary.dump() << "\n";
    return 0;
}

int cmd_estimate(const Common& c, const std::string& model_path, const std::string& trace_path) {
    EnergyModel m = load_model(model_path);
    std::istringstream ts(detail::read_file(trace_path));
    Trace t = read_trace(ts);
    EnergyEstimate e = estimate(t, m);
    std::string stem = fs::path(trace_path).stem().string();
    write_file(fs::path(c.outdir) / "reports" / ("estimate_" + stem + ".json"), dump(to_json(e)));
    std::cout << "total_pj=" << format_double(e.total) << " coverage=" << format_double(e.coverage) << "\n";
    return 0;
}

int cmd_validate(const Common& c, const std::string& model_arg) {
    Inputs in = load_inputs(c);
    fs::path outdir(c.outdir);
    EnergyModel model;
    if (model_arg.empty()) {
        TrainingOptions to;
        auto benches = training_benchmarks(in.api, in.isa, in.config, to);
        auto results = run_campaign(benches, in.config, in.params, c.workers);
        model = train_model(benches, results, fine_grained_function(), in.config).model;
        model.provenance["fit_date"] = fit_date();
        write_file(outdir / "models" / "default.json", serialize_model(model));
    } else {
        model = load_model(model_arg);
    }
    auto apps = reference_applications(in.config, in.isa, c.seed);
    ErrorReport rep = validate(model, apps, in.config, in.params);
    write_file(outdir / "reports" / "validation.csv", validation_csv(rep));
    write_file(outdir / "reports" / "validation_summary.json", dump(validation_summary(rep)));
    std::cout << "mean_rel_error=" << format_double(rep.mean_rel_error) << " max_rel_error=" << format_double(rep.max_rel_error)
              << "\n";
    return 0;
}

int cmd_sweep_noc(const Common& c, const std::string& src, const std::string& dst, uint32_t min, uint32_t max, uint32_t step,
                  size_t window) {
    Inputs in = load_inputs(c);
    auto pts = sweep_noc(in.config, in.params, in.isa, parse_coord(src), parse_coord(dst), SizeRange{min, max, step}, c.workers);
    fs::path rep = fs::path(c.outdir) / "reports";
    write_file(rep / "noc_sweep.csv", noc_sweep_csv(pts));
    std::vector<SizePoint> all;
    for (const auto& p : pts) all.push_back({static_cast<double>(p.size), p.energy_pj});
    auto [lo, hi] = center_window(all.size(), window);
    std::vector<SizePoint> fit(all.begin() + static_cast<std::ptrdiff_t>(lo), all.begin() + static_cast<std::ptrdiff_t>(hi));
    json summary{{"points", all.size()}, {"fit_points", fit.size()}};
    try {
        auto lin = fit_linear(fit, all);
        auto st = fit_staircase(fit, in.config.flit_payload_bytes, all);
        summary["linear"] = {{"a", lin.reducer.a}, {"b", lin.reducer.b}, {"max_abs_error_pj", lin.report.max_abs_error}};
        summary["staircase"] = {{"a", st.reducer.a}, {"b", st.reducer.b}, {"max_abs_error_pj", st.report.max_abs_error}};
        std::string csv = "size_bytes,oracle_pj,linear_pj,staircase_pj\n";
        for (const auto& p : all)
            csv += format_double(p.size) + "," + format_double(p.energy) + "," + format_double(lin.reducer(p.size)) + "," +
                   format_double(st.reducer(p.size)) + "\n";
        write_file(rep / "noc_fit.csv", csv);
    } catch (const InvariantError& e) {
        summary["fit_error"] = e.what();
    }
    write_file(rep / "noc_sweep_summary.json", dump(summary));
    std::cout << summary.dump() << "\n";
    return 0;
}

int cmd_sweep_imem(const Common& c, const std::string& group, uint32_t lo, uint32_t hi, const std::string& pattern,
                   uint32_t reps) {
    Inputs in = load_inputs(c);
    auto g = parse_group(split(group, ','), *in.isa, in.config.vliw_slots);
    BenchOptions bo;
    bo.reps = reps;
    auto pts = sweep_imem(in.config, in.params, in.isa, g, lo, hi, parse_pattern(pattern), bo, c.workers);
    double emin = pts.front().energy_pj, emax = emin;
    for (const auto& p : pts) {
        emin = std::min(emin, p.energy_pj);
        emax = std::max(emax, p.energy_pj);
    }
    std::string tag = g.compressed() ? "1slot" : "2slot";
    fs::path rep = fs::path(c.outdir) / "reports";
    write_file(rep / ("imem_sweep_" + tag + ".csv"), imem_sweep_csv(pts));
    json summary{{"group", group_name(g, *in.isa)}, {"format", tag}, {"points", pts.size()},
                 {"min_pj", emin},                  {"max_pj", emax}, {"range_pj", emax - emin}};
    write_file(rep / ("imem_sweep_" + tag + "_summary.json"), dump(summary));
    std::cout << summary.dump() << "\n";
    return 0;
}

struct ExploreArgs {
    std::string graph = "data/graphs/pipeline4.json";
    std::string model;
    uint32_t steps = 10000;
    uint32_t runs = 8;
    double w_energy = 1.0, w_period = 0.0;
    std::optional<double> t0;
    double cooling = 0;
    uint32_t max_granularity = 4, max_clones = 4;
};

int cmd_explore(const Common& c, const ExploreArgs& a) {
    Inputs in = load_inputs(c);
    auto graph = load_graph(a.graph, *in.isa, in.config);
    EnergyModel model;
    if (a.model.empty())
        model = train_default_model(in.config, in.params, c.workers).model;
    else
        model = load_model(a.model);
    PartitionEvaluator eval(graph, model, in.config, CostWeights{a.w_energy, a.w_period});
    AnnealOptions ao;
    ao.initial_temp = a.t0;
    ao.cooling = a.cooling;
    ao.steps = a.steps;
    ao.seed = c.seed;
    ao.max_granularity = a.max_granularity;
    ao.max_clones = a.max_clones;
    AnnealResult res = anneal_multi(eval, ao, a.runs);
    fs::path rep = fs::path(c.outdir) / "reports";
    json out{{"seed", res.seed}, {"partition", to_json(res.best, graph)}, {"score", to_json(res.best_eval)}};
    write_file(rep / "partition.json", dump(out));
    write_file(rep / "anneal_history.csv", history_csv(res.history));
    std::cout << out["score"].dump() << "\n";
    return 0;
}

int cmd_report(const Common& c) {
    fs::path rep = fs::path(c.outdir) / "reports";
    if (!fs::is_directory(rep)) throw MissingFileError(rep.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(rep)) {
        auto name = e.path().filename().string();
        if (e.path().extension() == ".json" && name != "report.json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    json agg = json::object();
    for (const auto& p : files) agg[p.stem().string()] = detail::parse_json_text(detail::read_file(p.string()), p.string());
    write_file(rep / "report.json", dump(agg));
    for (const auto& p : files) std::cout << p.filename().string() << "\n";
    return 0;
}

void print_error(const Error& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '"', '\'');
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "error: code=" << static_cast<int>(e.code()) << " kind=" << e.kind() << " message=\"" << msg << "\"\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Energy models for many-core systems from simulated state transitions"};
    app.footer("Exit status: 0 ok, 1 other error, 2 usage, 3 missing file, 4 parse error, 5 invariant violation.\n"
               "Failures print one line: error: code=N kind=K message=\"...\"");
    app.require_subcommand(1);
    app.fallthrough();

    Common c;
    const char* env_out = std::getenv("ENERMOD_OUTDIR");
    c.outdir = env_out && *env_out ? env_out : "enermod_out";
    app.add_option("--outdir", c.outdir, "Output directory (default $ENERMOD_OUTDIR or enermod_out)");
    app.add_option("--config", c.config_path, "Platform config JSON");
    app.add_option("--isa", c.isa_path, "ISA description JSON");
    app.add_option("--api", c.api_path, "Communication API JSON");
    app.add_option("--params", c.params_path, "Oracle parameters JSON");
    app.add_option("--workers", c.workers, "Parallel simulation workers")->check(CLI::PositiveNumber);
    app.add_option("--seed", c.seed, "Seed for every random choice");

    GenBenchArgs gb;
    auto* gen = app.add_subcommand("gen-bench", "Write benchmark programs and a manifest");
    gen->add_option("--kind", gb.kind, "instr|position|comm|local|idle|sync|training|apps|transition");
    gen->add_option("--patterns", gb.patterns, "all or comma list of zeros,ones,alternating");
    gen->add_option("--reps", gb.reps, "Repetitions of the measured body")->check(CLI::PositiveNumber);
    gen->add_option("--group", gb.group, "Comma list of slot mnemonics (position sweeps)");
    gen->add_option("--lo", gb.lo, "First position");
    gen->add_option("--hi", gb.hi, "Last position");
    gen->add_option("--src", gb.src, "Source cluster x,y");
    gen->add_option("--dst", gb.dst, "Destination cluster x,y");
    gen->add_option("--min", gb.min, "Smallest packet size in bytes");
    gen->add_option("--max", gb.max, "Largest packet size in bytes");
    gen->add_option("--step", gb.step, "Packet size increment in bytes");
    gen->add_flag("--center-window", gb.window, "Only the 16 sizes around the middle of the sweep");
    gen->add_option("--states", gb.states, "States of the toy component (transition kind)");

    std::string manifest;
    auto* oracle = app.add_subcommand("oracle", "Simulate a benchmark manifest; write traces and ledgers");
    oracle->add_option("--manifest", manifest, "Manifest CSV (default <outdir>/benchmarks/manifest.csv)");

    FitArgs fa;
    auto* fit = app.add_subcommand("fit", "Fit model constants to a simulated campaign");
    fit->add_option("--manifest", fa.manifest, "Manifest CSV");
    fit->add_option("--function", fa.function, "Standard function name or rule file");
    fit->add_option("--out", fa.out, "Model output path");
    fit->add_flag("--no-subtract", fa.no_subtract, "Use whole runs instead of subtracting the setup run");
    fit->add_flag("--include-setup", fa.include_setup, "Also fit the setup-only runs");
    fit->add_option("--noc-reducer", fa.noc_reducer, "none|linear|staircase");
    fit->add_option("--window", fa.window, "Sizes per packet family used by the reducer fit");

    std::string model_path, reduce_kind = "staircase", reduce_out;
    size_t reduce_window = 16;
    auto* reduce = app.add_subcommand("reduce", "Reduce a model: hops, linear or staircase");
    reduce->add_option("--model", model_path, "Model JSON")->required();
    reduce->add_option("--kind", reduce_kind, "hops|linear|staircase");
    reduce->add_option("--window", reduce_window, "Sizes per family used by the fit");
    reduce->add_option("--out", reduce_out, "Output path (default: overwrite)");

    std::string trace_path;
    auto* est = app.add_subcommand("estimate", "Estimate the energy of a trace");
    est->add_option("--model", model_path, "Model JSON")->required();
    est->add_option("--trace", trace_path, "Trace file")->required();

    std::string validate_model;
    auto* val = app.add_subcommand("validate", "Compare a model against the simulator on the reference applications");
    val->add_option("--model", validate_model, "Model JSON (default: train the simplified model)");

    std::string src = "0,0", dst = "1,1";
    uint32_t smin = 4, smax = 1024, sstep = 4;
    size_t swindow = 16;
    auto* snoc = app.add_subcommand("sweep-noc", "Packet-size sweep with linear and staircase fits");
    snoc->add_option("--src", src, "Source cluster x,y");
    snoc->add_option("--dst", dst, "Destination cluster x,y");
    snoc->add_option("--min", smin, "Smallest size");
    snoc->add_option("--max", smax, "Largest size");
    snoc->add_option("--step", sstep, "Size increment")->check(CLI::PositiveNumber);
    snoc->add_option("--window", swindow, "Fit points around the middle of the sweep");

    std::string igroup = "NOP,NOP", ipattern = "zeros";
    uint32_t ilo = 0, ihi = 799, ireps = 64;
    auto* simem = app.add_subcommand("sweep-imem", "Instruction-memory position sweep");
    simem->add_option("--group", igroup, "Comma list of slot mnemonics");
    simem->add_option("--lo", ilo, "First position");
    simem->add_option("--hi", ihi, "Last position");
    simem->add_option("--pattern", ipattern, "zeros|ones|alternating");
    simem->add_option("--reps", ireps, "Repetitions per position")->check(CLI::PositiveNumber);

    ExploreArgs ea;
    auto* explore = app.add_subcommand("explore", "Map a dataflow graph by simulated annealing");
    explore->add_option("--graph", ea.graph, "Dataflow graph JSON");
    explore->add_option("--model", ea.model, "Model JSON (default: train the simplified model)");
    explore->add_option("--steps", ea.steps, "Annealing steps per run");
    explore->add_option("--runs", ea.runs, "Independent runs, seeds seed..seed+runs-1")->check(CLI::PositiveNumber);
    explore->add_option("--w-energy", ea.w_energy, "Cost weight of energy per iteration");
    explore->add_option("--w-period", ea.w_period, "Cost weight of the throughput proxy");
    explore->add_option("--t0", ea.t0, "Initial temperature (0: greedy)");
    explore->add_option("--cooling", ea.cooling, "Geometric cooling factor");
    explore->add_option("--max-granularity", ea.max_granularity, "Largest granularity multiplier");
    explore->add_option("--max-clones", ea.max_clones, "Largest clone factor");

    auto* report = app.add_subcommand("report", "Aggregate report summaries into report.json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error(Error(ErrorCode::usage, e.what()));
        return static_cast<int>(ErrorCode::usage);
    }

    try {
        if (*gen) return cmd_gen_bench(c, gb);
        if (*oracle) return cmd_oracle(c, manifest);
        if (*fit) return cmd_fit(c, fa);
        if (*reduce) return cmd_reduce(c, model_path, reduce_kind, reduce_window, reduce_out);
        if (*est) return cmd_estimate(c, model_path, trace_path);
        if (*val) return cmd_validate(c, validate_model);
        if (*snoc) return cmd_sweep_noc(c, src, dst, smin, smax, sstep, swindow);
        if (*simem) return cmd_sweep_imem(c, igroup, ilo, ihi, ipattern, ireps);
        if (*explore) return cmd_explore(c, ea);
        if (*report) return cmd_report(c);
    } catch (const Error& e) {
        print_error(e);
        return static_cast<int>(e.code());
    } catch (const std::exception& e) {
        print_error(Error(ErrorCode::generic, e.what()));
        return static_cast<int>(ErrorCode::generic);
    }
    return 0;
}
