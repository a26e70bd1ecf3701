#pragma once

#include <treeseed/experiment.hpp>

#include <string>

namespace treeseed {

// JSON persistence. All documents carry "format_version": 1 and numbers
// round-trip bit-exactly (shortest-representation encoding).

std::string model_to_json(const TreeModel& model);
TreeModel model_from_json(const std::string& text);
void save_model(const TreeModel& model, const std::string& path);
TreeModel load_model(const std::string& path);

std::string stack_to_json(const LayerStack& stack);
LayerStack stack_from_json(const std::string& text);
void save_stack(const LayerStack& stack, const std::string& path);
LayerStack load_stack(const std::string& path);

/// Training checkpoint: layer arrays in the stack format plus Adam state and
/// the epoch index.
struct Checkpoint {
    Mlp<float> mlp;
    AdamState<float> adam;
    int epoch = 0;
    int best_epoch = -1;
    Task task = Task::regression;
    int n_classes = 1;
};

std::string checkpoint_to_json(const Checkpoint& ck);
Checkpoint checkpoint_from_json(const std::string& text);
void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

SchemaFile schema_from_json(const std::string& text);
std::string schema_to_json(const SchemaFile& schema);
SchemaFile load_schema(const std::string& path);
void save_schema(const SchemaFile& schema, const std::string& path);

/// History CSV: epoch,train_loss,val_loss,val_metric,seconds.
std::string history_to_csv(const TrainHistory& history);
void save_history(const TrainHistory& history, const std::string& path);

std::string report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const std::string& text);
void save_report(const ExperimentReport& report, const std::string& path);
ExperimentReport load_report(const std::string& path);

/// Tidy curve CSV: method,repeat,fold,epoch,split,loss.
std::string curves_to_csv(const std::vector<CurvePoint>& curves);

std::string sparsity_to_json(const SparsityReport& report);

void write_dataset_csv(const Dataset& ds, const std::string& target_name,
                       const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace treeseed
