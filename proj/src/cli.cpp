#include "sketchshift/cli.hpp"

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "sketchshift/embedding.hpp"
#include "sketchshift/error.hpp"
#include "sketchshift/ingest.hpp"
#include "sketchshift/json_io.hpp"
#include "sketchshift/model_store.hpp"
#include "sketchshift/pipeline.hpp"
#include "sketchshift/service.hpp"
#include "sketchshift/shift_engine.hpp"

namespace sketchshift::cli {

namespace {

using nlohmann::json;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataOptions {
    std::vector<std::string> data;
    std::string embeddings;
    bool normalize = false;
};

void add_data_options(CLI::App* cmd, DataOptions& o, bool data_required = true) {
    auto* data = cmd->add_option("--data", o.data, "Dataset files (.ndjson or .bin)")->check(CLI::ExistingFile);
    if (data_required) data->required();
    cmd->add_option("--embeddings", o.embeddings, "Precomputed SKEM embedding file")->check(CLI::ExistingFile);
    cmd->add_flag("--normalize", o.normalize, "L2-normalize precomputed embedding rows on load");
}

SketchStore load_store(const DataOptions& o) {
    std::vector<std::filesystem::path> files(o.data.begin(), o.data.end());
    return build_store_from_files(files);
}

/// Features for stored sketches, either from the reference embedder or from
/// a precomputed matrix.
struct FeatureContext {
    ReferenceEmbedder reference;
    EmbeddingMatrix matrix;
    EmbedderFingerprint fingerprint;
    std::unique_ptr<FeatureSource> source;
    bool external = false;
};

std::unique_ptr<FeatureContext> make_features(const DataOptions& o, const PreprocessOptions& pre) {
    auto ctx = std::make_unique<FeatureContext>();
    if (o.embeddings.empty()) {
        if (o.normalize) throw UsageError("--normalize applies only with --embeddings");
        ctx->fingerprint = ctx->reference.fingerprint();
        ctx->source = std::make_unique<EmbedderFeatures>(ctx->reference, pre);
        return ctx;
    }
    ctx->external = true;
    ctx->matrix = load_embeddings(o.embeddings);
    if (o.normalize)
        for (auto& row : ctx->matrix.rows) l2_normalize(row);
    ctx->fingerprint = fingerprint_external_file(o.embeddings, o.normalize);
    ctx->source = std::make_unique<MatrixFeatures>(ctx->matrix);
    return ctx;
}

void require_fingerprint(const FeatureContext& ctx, const ClusterModel& model) {
    if (ctx.fingerprint != model.fingerprint)
        throw ValidationError("model was fitted with embedder '" + model.fingerprint.name +
                              "' which differs from the features supplied");
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class OutputFile {
public:
    OutputFile(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
        if (path.empty() || path == "-") return;
        file_.open(path, std::ios::trunc);
        if (!file_) throw IoError("cannot open " + path + " for writing");
        stream_ = &file_;
    }
    std::ostream& operator*() { return *stream_; }

private:
    std::ofstream file_;
    std::ostream* stream_;
};

// ---------------------------------------------------------------- ingest

int cmd_ingest(const DataOptions& data, std::ostream& out) {
    struct Counts {
        std::size_t sketches = 0, strokes = 0, points = 0;
    };
    std::map<std::string, Counts> counts;
    Counts total;
    std::size_t unlabeled = 0;
    for (const auto& file : data.data) {
        for_each_sketch_in_file(file, [&](Sketch&& s) {
            Counts& c = s.category ? counts[*s.category] : counts["(unlabeled)"];
            if (!s.category) ++unlabeled;
            ++c.sketches;
            ++total.sketches;
            for (const auto& stroke : s.strokes) {
                ++c.strokes;
                ++total.strokes;
                c.points += stroke.points.size();
                total.points += stroke.points.size();
            }
        });
    }
    out << "category,sketches,strokes,points\n";
    for (const auto& [label, c] : counts)
        out << csv_field(label) << ',' << c.sketches << ',' << c.strokes << ',' << c.points << '\n';
    out << "TOTAL," << total.sketches << ',' << total.strokes << ',' << total.points << '\n';
    // Unlabeled records cannot enter a store; treat as a validation failure.
    return unlabeled ? 1 : 0;
}

// ---------------------------------------------------------------- fit

struct FitCommand {
    DataOptions data;
    FitParams params;
    PreprocessOptions pre;
    std::vector<std::string> k_overrides;
    std::string out;
    std::string elbow_dir;
};

int cmd_fit(FitCommand& c, std::ostream& out) {
    if (c.params.sample_cap < c.params.k_max) throw UsageError("--cap must be at least --k-max");
    if (c.params.k_max < c.params.k_min + 1) throw UsageError("--k-max must exceed --k-min");
    if (c.pre.raster_side < 8) throw UsageError("--side must be at least 8");
    for (const auto& entry : c.k_overrides) {
        const auto eq = entry.rfind('=');
        std::size_t k = 0;
        if (eq == std::string::npos || eq == 0) throw UsageError("--k expects CATEGORY=K, got " + entry);
        try {
            k = std::stoul(entry.substr(eq + 1));
        } catch (const std::exception&) {
            throw UsageError("--k expects CATEGORY=K, got " + entry);
        }
        if (k == 0) throw UsageError("--k values must be positive");
        c.params.k_overrides[entry.substr(0, eq)] = k;
    }

    const auto store = load_store(c.data);
    const auto ctx = make_features(c.data, c.pre);
    if (ctx->external)
        for (auto id : ctx->matrix.ids)
            if (!store.find(id)) throw ValidationError("embedding row " + std::to_string(id) + " has no sketch");

    const auto outcome = fit_model(store, *ctx->source, ctx->fingerprint, c.params);
    const auto bytes = save_model(outcome.model, c.out);

    if (!c.elbow_dir.empty()) {
        std::filesystem::create_directories(c.elbow_dir);
        for (const auto& cf : outcome.per_category) {
            if (cf.elbow.empty()) continue;
            const auto path = std::filesystem::path(c.elbow_dir) / (cf.category + ".elbow.csv");
            std::ofstream csv(path, std::ios::trunc);
            if (!csv) throw IoError("cannot write " + path.string());
            csv << "k,wcss\n";
            for (const auto& p : cf.elbow) csv << p.k << ',' << fmt_double(p.wcss) << '\n';
        }
    }
    out << "category,sketches,k,wcss\n";
    for (const auto& cf : outcome.per_category)
        out << csv_field(cf.category) << ',' << cf.ids.size() << ',' << cf.fit.centroids.size() << ','
            << fmt_double(cf.fit.wcss) << '\n';
    out << "wrote " << c.out << " (" << bytes << " bytes)\n";
    return 0;
}

// ---------------------------------------------------------------- respond

struct RespondCommand {
    std::string model;
    DataOptions data;
    PreprocessOptions pre;
    std::string input = "-";
    std::size_t n = 5;
    std::string policy = "random";
    std::uint64_t seed = 0;
    std::size_t turn_index = 0;
    std::string within;
    std::optional<SketchId> id;
};

TurnOptions turn_options(const RespondCommand& c) {
    TurnOptions o;
    o.preprocess = c.pre;
    o.n = c.n;
    o.policy = *policy_from_string(c.policy);
    o.seed = c.seed;
    o.turn_index = c.turn_index;
    if (!c.within.empty()) o.recognize_within = c.within;
    return o;
}

int cmd_respond(const RespondCommand& c, std::ostream& out) {
    try {
        const auto model = load_model(c.model);
        const auto store = load_store(c.data);
        const auto ctx = make_features(c.data, c.pre);
        require_fingerprint(*ctx, model);
        const auto options = turn_options(c);

        TurnRecord turn;
        if (c.id) {
            const Sketch& input = store.at(*c.id);
            turn = respond_features(ctx->source->features(input), input, model, store, options, ctx->source.get());
        } else {
            if (ctx->external) throw UsageError("models on precomputed embeddings need --id");
            std::string text;
            if (c.input == "-") {
                text.assign(std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>());
            } else {
                std::ifstream in(c.input);
                if (!in) throw IoError("cannot open " + c.input);
                text.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
            }
            json doc;
            try {
                doc = json::parse(text);
            } catch (const json::exception&) {
                throw InvalidStrokes("input is not valid JSON");
            }
            const json& strokes = doc.is_object() ? doc.value("strokes", json()) : doc;
            turn = respond_turn(strokes_from_json(strokes), model, store, ctx->reference, options);
        }
        out << turn_to_json(turn).dump(2) << '\n';
        return 0;
    } catch (const UsageError&) {
        throw;
    } catch (const std::exception& e) {
        out << json{{"error", e.what()}}.dump() << '\n';
        return 1;
    }
}

// ---------------------------------------------------------------- batch-respond

int cmd_batch(const RespondCommand& c, std::size_t per_category, bool within_category, const std::string& out_path,
              std::ostream& out) {
    const auto model = load_model(c.model);
    const auto store = load_store(c.data);
    const auto ctx = make_features(c.data, c.pre);
    require_fingerprint(*ctx, model);

    OutputFile sink(out_path, out);
    *sink << "input_id,input_category,recognized_category,recognized_cluster,target_category,target_cluster,"
             "distance\n";
    std::size_t turn_index = 0;
    for (const auto& category : model.categories) {
        const auto& ids = store.ids_in(category);
        for (std::size_t i = 0; i < std::min(per_category, ids.size()); ++i) {
            const Sketch& input = store.at(ids[i]);
            auto options = turn_options(c);
            options.n = 1;
            options.turn_index = turn_index++;
            if (within_category) options.recognize_within = category;
            const auto turn =
                respond_features(ctx->source->features(input), input, model, store, options, ctx->source.get());
            const auto& p = turn.proposals.front();
            *sink << input.id << ',' << csv_field(category) << ',' << csv_field(turn.recognition.cluster.category)
                  << ',' << turn.recognition.cluster.local_index << ',' << csv_field(p.target.category) << ','
                  << p.target.local_index << ',' << fmt_double(p.distance) << '\n';
        }
    }
    return 0;
}

// ---------------------------------------------------------------- project

int cmd_project(const std::string& model_path, const DataOptions& data, const PreprocessOptions& pre,
                const std::string& out_path, std::ostream& out) {
    const auto model = load_model(model_path);
    const auto store = load_store(data);
    const auto ctx = make_features(data, pre);
    require_fingerprint(*ctx, model);

    OutputFile sink(out_path, out);
    *sink << "category,id,cluster,pc1,pc2\n";
    for (const auto& category : model.categories) {
        std::vector<SketchId> ids;
        std::vector<std::size_t> cluster_of;
        std::vector<FeatureVector> points;
        for (const auto& c : model.clusters) {
            if (c.category != category) continue;
            for (auto id : c.member_ids) {
                ids.push_back(id);
                cluster_of.push_back(c.local_index);
                points.push_back(ctx->source->features(store.at(id)));
            }
        }
        const auto proj = project_pca(points);
        for (std::size_t i = 0; i < ids.size(); ++i)
            *sink << csv_field(category) << ',' << ids[i] << ',' << cluster_of[i] << ','
                  << fmt_double(proj.coords[i][0]) << ',' << fmt_double(proj.coords[i][1]) << '\n';
    }
    return 0;
}

// ---------------------------------------------------------------- serve

std::atomic<httplib::Server*> g_server{nullptr};

extern "C" void stop_server(int) {
    if (auto* s = g_server.load()) s->stop();
}

struct ServeCommand {
    std::string model;
    std::vector<std::string> data;
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string allow_origin;
    std::optional<std::uint64_t> seed;
    long ttl = 1800;
    std::size_t threads = 64;
    std::string static_dir;
    PreprocessOptions pre;
};

int cmd_serve(ServeCommand& c, std::ostream& out, std::ostream& err) {
    if (c.model.empty())
        if (const char* env = std::getenv("SKETCHSHIFT_MODEL")) c.model = env;
    if (c.threads < 1) throw UsageError("--threads must be positive");

    ServiceConfig config;
    config.seed = c.seed ? *c.seed : std::random_device{}();
    config.allow_origin = c.allow_origin;
    config.session_ttl = std::chrono::seconds(c.ttl);
    config.worker_threads = c.threads;
    config.preprocess = c.pre;
    TurnService service(config);
    if (!c.model.empty()) {
        auto model = load_model(c.model);
        std::vector<std::filesystem::path> files(c.data.begin(), c.data.end());
        service.load(std::move(model), build_store_from_files(files));
    } else {
        err << "no model given (--model or SKETCHSHIFT_MODEL); turn endpoints will answer 503\n";
    }

    httplib::Server server;
    service.mount(server);
    if (!c.static_dir.empty() && !server.set_mount_point("/", c.static_dir))
        throw IoError("cannot serve static files from " + c.static_dir);
    g_server = &server;
    std::signal(SIGINT, stop_server);
    std::signal(SIGTERM, stop_server);
    out << "listening on http://" << c.host << ':' << c.port << std::endl;
    const bool ok = server.listen(c.host, c.port);
    g_server = nullptr;
    if (!ok) throw IoError("cannot listen on " + c.host + ":" + std::to_string(c.port));
    return 0;
}

void add_preprocess_options(CLI::App* cmd, PreprocessOptions& pre) {
    cmd->add_option("--epsilon", pre.rdp_epsilon, "RDP simplification tolerance")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--side", pre.raster_side, "Raster side in pixels")->capture_default_str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Conceptual-shift sketch engine: offline pipeline and turn server", "sketchshift"};
    app.require_subcommand(1);

    DataOptions ingest_data;
    auto* ingest = app.add_subcommand("ingest", "Parse and validate dataset files, report counts");
    add_data_options(ingest, ingest_data);

    FitCommand fit;
    auto* fit_cmd = app.add_subcommand("fit", "Embed, select k per category by elbow, fit k-means, write a model");
    add_data_options(fit_cmd, fit.data);
    add_preprocess_options(fit_cmd, fit.pre);
    fit_cmd->add_option("--categories", fit.params.categories, "Restrict to these categories")->delimiter(',');
    fit_cmd->add_option("--cap", fit.params.sample_cap, "Sketches per category")->capture_default_str();
    fit_cmd->add_option("--k-min", fit.params.k_min, "Smallest k tried")->capture_default_str()->check(CLI::PositiveNumber);
    fit_cmd->add_option("--k-max", fit.params.k_max, "Largest k tried")->capture_default_str();
    fit_cmd->add_option("--seed", fit.params.seed, "RNG seed")->capture_default_str();
    fit_cmd->add_option("--k", fit.k_overrides, "Fix k for a category: CATEGORY=K (repeatable)");
    fit_cmd->add_option("--threads", fit.params.threads, "Worker threads (0: all cores)")->capture_default_str();
    fit_cmd->add_option("--out", fit.out, "Model output path")->required();
    fit_cmd->add_option("--elbow-dir", fit.elbow_dir, "Write <category>.elbow.csv curves here");

    RespondCommand respond;
    auto add_respond_options = [](CLI::App* cmd, RespondCommand& r) {
        cmd->add_option("--model", r.model, "SKCM model file")->required()->check(CLI::ExistingFile);
        add_data_options(cmd, r.data);
        add_preprocess_options(cmd, r.pre);
        cmd->add_option("--policy", r.policy, "Exemplar policy")
            ->capture_default_str()
            ->check(CLI::IsMember({"random", "medoid"}));
        cmd->add_option("--seed", r.seed, "Contribution seed")->capture_default_str();
    };
    auto* respond_cmd = app.add_subcommand("respond", "Answer one sketch with conceptual shifts (JSON)");
    add_respond_options(respond_cmd, respond);
    respond_cmd->add_option("--input", respond.input, "Strokes JSON file, '-' for stdin")->capture_default_str();
    respond_cmd->add_option("--n", respond.n, "Number of proposals")->capture_default_str()->check(CLI::PositiveNumber);
    respond_cmd->add_option("--turn-index", respond.turn_index, "Turn index")->capture_default_str();
    respond_cmd->add_option("--within", respond.within, "Recognize only within this category");
    respond_cmd->add_option("--id", respond.id, "Respond to a stored sketch instead of --input");

    RespondCommand batch;
    std::size_t per_category = 10;
    bool within_category = false;
    std::string batch_out;
    auto* batch_cmd = app.add_subcommand("batch-respond", "Replay stored sketches; CSV of source -> target shifts");
    add_respond_options(batch_cmd, batch);
    batch_cmd->add_option("--per-category", per_category, "Sketches replayed per category")->capture_default_str();
    batch_cmd->add_flag("--within-category", within_category, "Recognize each input within its own category");
    batch_cmd->add_option("--out", batch_out, "CSV output path (default stdout)");

    std::string project_model, project_out;
    DataOptions project_data;
    PreprocessOptions project_pre;
    auto* project_cmd = app.add_subcommand("project", "Per-category PCA projection of cluster members to CSV");
    project_cmd->add_option("--model", project_model, "SKCM model file")->required()->check(CLI::ExistingFile);
    add_data_options(project_cmd, project_data);
    add_preprocess_options(project_cmd, project_pre);
    project_cmd->add_option("--out", project_out, "CSV output path (default stdout)");

    ServeCommand serve;
    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP turn service");
    serve_cmd->add_option("--model", serve.model, "SKCM model file (default $SKETCHSHIFT_MODEL)");
    serve_cmd->add_option("--data", serve.data, "Dataset files backing the model")->check(CLI::ExistingFile);
    serve_cmd->add_option("--host", serve.host, "Bind address")->capture_default_str();
    serve_cmd->add_option("--port", serve.port, "Bind port")->capture_default_str()->check(CLI::Range(0, 65535));
    serve_cmd->add_option("--allow-origin", serve.allow_origin, "CORS origin allowed to call the API");
    serve_cmd->add_option("--seed", serve.seed, "Server seed (default random)");
    serve_cmd->add_option("--ttl", serve.ttl, "Session idle TTL in seconds")->capture_default_str()->check(CLI::PositiveNumber);
    serve_cmd->add_option("--threads", serve.threads, "HTTP worker threads")->capture_default_str();
    serve_cmd->add_option("--static-dir", serve.static_dir, "Directory of UI files served at /");
    add_preprocess_options(serve_cmd, serve.pre);

    std::vector<const char*> argv{"sketchshift"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "sketchshift: " << e.what() << "\n";
        return 2;
    }

    try {
        if (*ingest) return cmd_ingest(ingest_data, out);
        if (*fit_cmd) return cmd_fit(fit, out);
        if (*respond_cmd) return cmd_respond(respond, out);
        if (*batch_cmd) return cmd_batch(batch, per_category, within_category, batch_out, out);
        if (*project_cmd) return cmd_project(project_model, project_data, project_pre, project_out, out);
        if (*serve_cmd) return cmd_serve(serve, out, err);
    } catch (const UsageError& e) {
        err << "sketchshift: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "sketchshift: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace sketchshift::cli
