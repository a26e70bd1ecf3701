#include <treeseed/serialize.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

using nlohmann::json;

namespace treeseed {

namespace {

void require_version(const json& j, const char* what) {
    if (!j.contains("format_version") || j["format_version"].get<int>() != kFormatVersion)
        throw DataError(std::string(what) + ": missing or unsupported format_version");
}

std::string kind_to_string(TreeKind kind) {
    switch (kind) {
        case TreeKind::single: return "single";
        case TreeKind::forest: return "forest";
        case TreeKind::gbdt: return "gbdt";
        case TreeKind::deep_forest: return "deep_forest";
    }
    return "single";
}

TreeKind kind_from_string(const std::string& s) {
    if (s == "single") return TreeKind::single;
    if (s == "forest") return TreeKind::forest;
    if (s == "gbdt") return TreeKind::gbdt;
    if (s == "deep_forest") return TreeKind::deep_forest;
    throw DataError("unknown model kind '" + s + "'");
}

json tree_to_jobj(const Tree& tree) {
    json nodes = json::array();
    for (const auto& node : tree.nodes)
        nodes.push_back({{"feature", node.feature},
                         {"threshold", node.threshold},
                         {"left", node.left},
                         {"right", node.right}});
    json leaves = json::array();
    for (const auto& leaf : tree.leaves) leaves.push_back({{"values", leaf}});
    return {{"nodes", nodes}, {"leaves", leaves}, {"output_dim", tree.output_dim}};
}

Tree tree_from_jobj(const json& j) {
    Tree tree;
    for (const auto& node : j.at("nodes"))
        tree.nodes.push_back({node.at("feature").get<int>(), node.at("threshold").get<double>(),
                              node.at("left").get<int>(), node.at("right").get<int>()});
    for (const auto& leaf : j.at("leaves"))
        tree.leaves.push_back(leaf.at("values").get<std::vector<double>>());
    tree.output_dim = j.at("output_dim").get<int>();
    return tree;
}

json model_to_jobj(const TreeModel& model) {
    json j;
    j["kind"] = kind_to_string(model.kind);
    j["task"] = to_string(model.task);
    j["n_classes"] = model.n_classes;
    j["input_dim"] = model.input_dim;
    j["flavor"] = model.flavor == ForestFlavor::breiman ? "breiman" : "completely_random";
    j["trees"] = json::array();
    for (const auto& tree : model.trees) j["trees"].push_back(tree_to_jobj(tree));
    j["weights"] = model.weights;
    j["base_offset"] = model.base_offset;
    j["shrinkage"] = model.shrinkage;
    j["trees_per_round"] = model.trees_per_round;
    if (model.kind == TreeKind::deep_forest) {
        j["best_layer"] = model.best_layer;
        j["layer_scores"] = model.layer_scores;
        j["cascade"] = json::array();
        for (const auto& layer : model.cascade) {
            json forests = json::array();
            for (const auto& forest : layer.forests) forests.push_back(model_to_jobj(forest));
            j["cascade"].push_back({{"forests", forests}});
        }
    }
    return j;
}

TreeModel model_from_jobj(const json& j) {
    TreeModel model;
    model.kind = kind_from_string(j.at("kind").get<std::string>());
    model.task = task_from_string(j.at("task").get<std::string>());
    model.n_classes = j.at("n_classes").get<int>();
    model.input_dim = j.at("input_dim").get<int>();
    model.flavor = j.at("flavor").get<std::string>() == "completely_random"
                       ? ForestFlavor::completely_random
                       : ForestFlavor::breiman;
    for (const auto& tree : j.at("trees")) model.trees.push_back(tree_from_jobj(tree));
    model.weights = j.at("weights").get<std::vector<double>>();
    model.base_offset = j.at("base_offset").get<std::vector<double>>();
    model.shrinkage = j.at("shrinkage").get<double>();
    model.trees_per_round = j.at("trees_per_round").get<int>();
    if (model.kind == TreeKind::deep_forest) {
        model.best_layer = j.at("best_layer").get<int>();
        model.layer_scores = j.at("layer_scores").get<std::vector<double>>();
        for (const auto& layer : j.at("cascade")) {
            TreeModel::CascadeLayer cl;
            for (const auto& forest : layer.at("forests"))
                cl.forests.push_back(model_from_jobj(forest));
            model.cascade.push_back(std::move(cl));
        }
    }
    return model;
}

Activation activation_from_string(const std::string& s) {
    if (s == "sign") return Activation::sign;
    if (s == "identity") return Activation::identity;
    if (s == "tanh") return Activation::tanh;
    throw DataError("unknown activation tag '" + s + "'");
}

NeuronRole role_from_string(const std::string& s) {
    if (s == "split") return NeuronRole::split;
    if (s == "leaf") return NeuronRole::leaf;
    if (s == "readout") return NeuronRole::readout;
    if (s == "passthrough") return NeuronRole::passthrough;
    if (s == "output") return NeuronRole::output;
    throw DataError("unknown neuron role '" + s + "'");
}

json matrix_to_row_major(const Matrix& m) {
    json values = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) values.push_back(m(r, c));
    return values;
}

json layer_to_jobj(const StackLayer& layer) {
    json j;
    j["rows"] = layer.W.rows();
    j["cols"] = layer.W.cols();
    j["weights"] = matrix_to_row_major(layer.W);
    j["bias"] = std::vector<double>(layer.b.data(), layer.b.data() + layer.b.size());
    const bool uniform =
        std::all_of(layer.act.begin(), layer.act.end(),
                    [&](Activation a) { return a == layer.act.front(); });
    if (layer.act.empty() || uniform) {
        j["activation"] = {{"tag", layer.act.empty() ? "identity" : to_string(layer.act.front())}};
    } else {
        json tags = json::array();
        for (Activation a : layer.act) tags.push_back(to_string(a));
        j["activation"] = {{"tag", "per_neuron"}, {"neurons", tags}};
    }
    json roles = json::array();
    for (NeuronRole r : layer.role) roles.push_back(to_string(r));
    j["roles"] = roles;
    return j;
}

StackLayer layer_from_jobj(const json& j) {
    StackLayer layer;
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto weights = j.at("weights").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(weights.size()) != rows * cols)
        throw DataError("layer weights length does not match rows*cols");
    layer.W.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c)
            layer.W(r, c) = weights[static_cast<std::size_t>(r * cols + c)];
    const auto bias = j.at("bias").get<std::vector<double>>();
    layer.b = Eigen::Map<const Vector>(bias.data(), static_cast<Eigen::Index>(bias.size()));
    const auto& act = j.at("activation");
    if (act.at("tag").get<std::string>() == "per_neuron") {
        for (const auto& tag : act.at("neurons"))
            layer.act.push_back(activation_from_string(tag.get<std::string>()));
    } else {
        layer.act.assign(static_cast<std::size_t>(rows),
                         activation_from_string(act.at("tag").get<std::string>()));
    }
    for (const auto& role : j.at("roles"))
        layer.role.push_back(role_from_string(role.get<std::string>()));
    return layer;
}

std::string shortest_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace

std::string model_to_json(const TreeModel& model) {
    json j = model_to_jobj(model);
    j["format_version"] = kFormatVersion;
    return j.dump(2);
}

TreeModel model_from_json(const std::string& text) {
    const json j = json::parse(text);
    require_version(j, "model");
    return model_from_jobj(j);
}

void save_model(const TreeModel& model, const std::string& path) {
    write_text_file(path, model_to_json(model));
}

TreeModel load_model(const std::string& path) { return model_from_json(read_text_file(path)); }

std::string stack_to_json(const LayerStack& stack) {
    json j;
    j["format_version"] = kFormatVersion;
    j["input_dim"] = stack.input_dim;
    j["output_dim"] = stack.output_dim;
    j["layers"] = json::array();
    for (const auto& layer : stack.layers) j["layers"].push_back(layer_to_jobj(layer));
    return j.dump(2);
}

LayerStack stack_from_json(const std::string& text) {
    const json j = json::parse(text);
    require_version(j, "layer stack");
    LayerStack stack;
    stack.input_dim = j.at("input_dim").get<int>();
    stack.output_dim = j.at("output_dim").get<int>();
    for (const auto& layer : j.at("layers")) stack.layers.push_back(layer_from_jobj(layer));
    return stack;
}

void save_stack(const LayerStack& stack, const std::string& path) {
    write_text_file(path, stack_to_json(stack));
}

LayerStack load_stack(const std::string& path) { return stack_from_json(read_text_file(path)); }

std::string checkpoint_to_json(const Checkpoint& ck) {
    json j;
    j["format_version"] = kFormatVersion;
    j["task"] = to_string(ck.task);
    j["n_classes"] = ck.n_classes;
    j["epoch"] = ck.epoch;
    j["best_epoch"] = ck.best_epoch;
    j["dims"] = ck.mlp.dims;
    auto dump_layers = [](const auto& Ws, const auto& bs) {
        json layers = json::array();
        for (std::size_t l = 0; l < Ws.size(); ++l) {
            json weights = json::array();
            const auto& W = Ws[l];
            for (Eigen::Index r = 0; r < W.rows(); ++r)
                for (Eigen::Index c = 0; c < W.cols(); ++c)
                    weights.push_back(static_cast<double>(W(r, c)));
            json bias = json::array();
            for (Eigen::Index r = 0; r < bs[l].size(); ++r)
                bias.push_back(static_cast<double>(bs[l][r]));
            layers.push_back({{"rows", W.rows()},
                              {"cols", W.cols()},
                              {"weights", weights},
                              {"bias", bias},
                              {"activation", {{"tag", "tanh"}}}});
        }
        return layers;
    };
    j["layers"] = dump_layers(ck.mlp.W, ck.mlp.b);
    j["optimizer"] = {{"t", ck.adam.t}};
    if (ck.adam.t > 0) {
        j["optimizer"]["mW"] = dump_layers(ck.adam.mW, ck.adam.mb);
        j["optimizer"]["vW"] = dump_layers(ck.adam.vW, ck.adam.vb);
    }
    return j.dump(2);
}

namespace {

template <class LoadW, class LoadB>
void load_layer_arrays(const json& layers, LoadW&& loadw, LoadB&& loadb) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        const auto rows = layer.at("rows").get<Eigen::Index>();
        const auto cols = layer.at("cols").get<Eigen::Index>();
        const auto weights = layer.at("weights").get<std::vector<double>>();
        MatrixT<float> W(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c)
                W(r, c) = static_cast<float>(weights[static_cast<std::size_t>(r * cols + c)]);
        const auto bias = layer.at("bias").get<std::vector<double>>();
        VectorT<float> b(static_cast<Eigen::Index>(bias.size()));
        for (std::size_t r = 0; r < bias.size(); ++r) b[static_cast<Eigen::Index>(r)] = static_cast<float>(bias[r]);
        loadw(l, std::move(W));
        loadb(l, std::move(b));
    }
}

}  // namespace

Checkpoint checkpoint_from_json(const std::string& text) {
    const json j = json::parse(text);
    require_version(j, "checkpoint");
    Checkpoint ck;
    ck.task = task_from_string(j.at("task").get<std::string>());
    ck.n_classes = j.at("n_classes").get<int>();
    ck.epoch = j.at("epoch").get<int>();
    ck.best_epoch = j.at("best_epoch").get<int>();
    ck.mlp.dims = j.at("dims").get<std::vector<int>>();
    const auto& layers = j.at("layers");
    ck.mlp.W.resize(layers.size());
    ck.mlp.b.resize(layers.size());
    load_layer_arrays(layers, [&](std::size_t l, MatrixT<float>&& W) { ck.mlp.W[l] = std::move(W); },
                      [&](std::size_t l, VectorT<float>&& b) { ck.mlp.b[l] = std::move(b); });
    ck.adam.t = j.at("optimizer").at("t").get<long>();
    if (ck.adam.t > 0) {
        const auto& mw = j.at("optimizer").at("mW");
        const auto& vw = j.at("optimizer").at("vW");
        ck.adam.mW.resize(mw.size());
        ck.adam.mb.resize(mw.size());
        ck.adam.vW.resize(vw.size());
        ck.adam.vb.resize(vw.size());
        load_layer_arrays(mw, [&](std::size_t l, MatrixT<float>&& W) { ck.adam.mW[l] = std::move(W); },
                          [&](std::size_t l, VectorT<float>&& b) { ck.adam.mb[l] = std::move(b); });
        load_layer_arrays(vw, [&](std::size_t l, MatrixT<float>&& W) { ck.adam.vW[l] = std::move(W); },
                          [&](std::size_t l, VectorT<float>&& b) { ck.adam.vb[l] = std::move(b); });
    }
    return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    write_text_file(path, checkpoint_to_json(ck));
}

Checkpoint load_checkpoint(const std::string& path) {
    return checkpoint_from_json(read_text_file(path));
}

SchemaFile schema_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("schema file: ") + e.what());
    }
    SchemaFile schema;
    if (!j.contains("columns") || !j.contains("target") || !j.contains("task"))
        throw DataError("schema file must declare columns, target and task");
    // hand-written schema files may omit the version; emitted ones carry it
    if (j.contains("format_version") && j["format_version"].get<int>() != kFormatVersion)
        throw DataError("schema file: unsupported format_version");
    for (const auto& col : j.at("columns")) {
        ColumnSchema cs;
        cs.name = col.at("name").get<std::string>();
        const std::string kind = col.at("kind").get<std::string>();
        if (kind == "numeric")
            cs.kind = ColumnKind::numeric;
        else if (kind == "categorical")
            cs.kind = ColumnKind::categorical;
        else
            throw DataError("schema column '" + cs.name + "': unknown kind '" + kind + "'");
        schema.columns.push_back(std::move(cs));
    }
    schema.target = j.at("target").get<std::string>();
    schema.task = task_from_string(j.at("task").get<std::string>());
    return schema;
}

std::string schema_to_json(const SchemaFile& schema) {
    json j;
    j["format_version"] = kFormatVersion;
    j["columns"] = json::array();
    for (const auto& col : schema.columns)
        j["columns"].push_back(
            {{"name", col.name},
             {"kind", col.kind == ColumnKind::numeric ? "numeric" : "categorical"}});
    j["target"] = schema.target;
    j["task"] = to_string(schema.task);
    return j.dump(2);
}

SchemaFile load_schema(const std::string& path) { return schema_from_json(read_text_file(path)); }

void save_schema(const SchemaFile& schema, const std::string& path) {
    write_text_file(path, schema_to_json(schema));
}

std::string history_to_csv(const TrainHistory& history) {
    std::ostringstream out;
    out << "epoch,train_loss,val_loss,val_metric,seconds\n";
    for (std::size_t e = 0; e < history.epochs.size(); ++e) {
        const auto& stats = history.epochs[e];
        out << (e + 1) << ',' << shortest_double(stats.train_loss) << ','
            << shortest_double(stats.val_loss) << ',' << shortest_double(stats.val_metric) << ','
            << shortest_double(stats.seconds) << '\n';
    }
    return out.str();
}

void save_history(const TrainHistory& history, const std::string& path) {
    write_text_file(path, history_to_csv(history));
}

namespace {

json sparsity_to_jobj(const SparsityReport& report) {
    json j;
    j["eps"] = report.eps;
    j["bin_edges"] = report.bin_edges;
    j["layers"] = json::array();
    for (const auto& layer : report.layers)
        j["layers"].push_back({{"weight_count", layer.weight_count},
                               {"zero_count", layer.zero_count},
                               {"fraction_below_eps", layer.fraction_below_eps},
                               {"counts", layer.counts}});
    return j;
}

SparsityReport sparsity_from_jobj(const json& j) {
    SparsityReport report;
    report.eps = j.at("eps").get<double>();
    report.bin_edges = j.at("bin_edges").get<std::vector<double>>();
    for (const auto& layer : j.at("layers")) {
        LayerSparsity ls;
        ls.weight_count = layer.at("weight_count").get<long>();
        ls.zero_count = layer.at("zero_count").get<long>();
        ls.fraction_below_eps = layer.at("fraction_below_eps").get<double>();
        ls.counts = layer.at("counts").get<std::vector<long>>();
        report.layers.push_back(std::move(ls));
    }
    return report;
}

}  // namespace

std::string report_to_json(const ExperimentReport& report) {
    json j;
    j["format_version"] = kFormatVersion;
    j["protocol"] = report.protocol;
    j["metric"] = report.metric_name;
    j["higher_is_better"] = report.higher_is_better;
    j["scores"] = json::array();
    for (const auto& s : report.scores)
        j["scores"].push_back({{"method", s.method},
                               {"repeat", s.repeat},
                               {"fold", s.fold},
                               {"metric", s.metric},
                               {"seconds", s.seconds},
                               {"seed", s.seed}});
    j["summaries"] = json::array();
    for (const auto& s : report.summaries)
        j["summaries"].push_back({{"method", s.method},
                                  {"mean", s.mean},
                                  {"stddev", s.stddev},
                                  {"count", s.count}});
    j["curves"] = json::array();
    for (const auto& c : report.curves)
        j["curves"].push_back({{"method", c.method},
                               {"repeat", c.repeat},
                               {"fold", c.fold},
                               {"epoch", c.epoch},
                               {"split", c.split},
                               {"loss", c.loss}});
    j["sparsity"] = json::array();
    for (const auto& s : report.sparsity)
        j["sparsity"].push_back({{"method", s.method},
                                 {"run", s.run},
                                 {"frac_below_1e3_epoch0", s.frac_below_1e3_epoch0},
                                 {"persistence_frac", s.persistence_frac},
                                 {"epoch0", sparsity_to_jobj(s.epoch0)},
                                 {"final", sparsity_to_jobj(s.final_epoch)}});
    j["metadata"] = report.metadata;
    return j.dump(2);
}

ExperimentReport report_from_json(const std::string& text) {
    const json j = json::parse(text);
    require_version(j, "report");
    ExperimentReport report;
    report.protocol = j.at("protocol").get<std::string>();
    report.metric_name = j.at("metric").get<std::string>();
    report.higher_is_better = j.at("higher_is_better").get<bool>();
    for (const auto& s : j.at("scores"))
        report.scores.push_back({s.at("method").get<std::string>(), s.at("repeat").get<int>(),
                                 s.at("fold").get<int>(), s.at("metric").get<double>(),
                                 s.at("seconds").get<double>(), s.at("seed").get<std::uint64_t>()});
    for (const auto& s : j.at("summaries"))
        report.summaries.push_back({s.at("method").get<std::string>(), s.at("mean").get<double>(),
                                    s.at("stddev").get<double>(), s.at("count").get<int>()});
    for (const auto& c : j.at("curves"))
        report.curves.push_back({c.at("method").get<std::string>(), c.at("repeat").get<int>(),
                                 c.at("fold").get<int>(), c.at("epoch").get<int>(),
                                 c.at("split").get<std::string>(), c.at("loss").get<double>()});
    for (const auto& s : j.at("sparsity")) {
        SparsitySnapshot snap;
        snap.method = s.at("method").get<std::string>();
        snap.run = s.at("run").get<int>();
        snap.frac_below_1e3_epoch0 = s.at("frac_below_1e3_epoch0").get<double>();
        snap.persistence_frac = s.at("persistence_frac").get<double>();
        snap.epoch0 = sparsity_from_jobj(s.at("epoch0"));
        snap.final_epoch = sparsity_from_jobj(s.at("final"));
        report.sparsity.push_back(std::move(snap));
    }
    report.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
    return report;
}

void save_report(const ExperimentReport& report, const std::string& path) {
    write_text_file(path, report_to_json(report));
}

ExperimentReport load_report(const std::string& path) {
    return report_from_json(read_text_file(path));
}

std::string curves_to_csv(const std::vector<CurvePoint>& curves) {
    std::ostringstream out;
    out << "method,repeat,fold,epoch,split,loss\n";
    for (const auto& c : curves)
        out << c.method << ',' << c.repeat << ',' << c.fold << ',' << c.epoch << ',' << c.split
            << ',' << shortest_double(c.loss) << '\n';
    return out.str();
}

std::string sparsity_to_json(const SparsityReport& report) {
    json j = sparsity_to_jobj(report);
    j["format_version"] = kFormatVersion;
    return j.dump(2);
}

void write_dataset_csv(const Dataset& ds, const std::string& target_name,
                       const std::string& path) {
    std::ostringstream out;
    for (const auto& col : ds.schema) out << col.name << ',';
    out << target_name << '\n';
    for (Eigen::Index i = 0; i < ds.rows(); ++i) {
        for (Eigen::Index j = 0; j < ds.cols(); ++j) out << shortest_double(ds.X(i, j)) << ',';
        if (ds.task == Task::regression)
            out << shortest_double(ds.y[i]) << '\n';
        else
            out << ds.label_at(i) << '\n';
    }
    write_text_file(path, out.str());
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file '" + path + "'");
    out << text;
    if (!out) throw DataError("failed writing file '" + path + "'");
}

}  // namespace treeseed
