#include "commands.h"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "popsynth/balance.h"
#include "popsynth/checkpoint.h"
#include "popsynth/csv.h"
#include "popsynth/error.h"
#include "popsynth/preprocess.h"
#include "popsynth/report.h"
#include "popsynth/schema.h"
#include "popsynth/toycensus.h"
#include "popsynth/validate.h"
#include "popsynth/wgan.h"

namespace popsynth::cli {
namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

constexpr const char* kConfigHelp =
    "Options may also come from --config FILE, a UTF-8 file of `key = value`\n"
    "lines where key is an option's long name without dashes. '#' starts a\n"
    "comment line. Flags given on the command line override file values.\n"
    "The effective configuration is written to reports/<command>.conf.";

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
std::string to_text(const T& v) {
  if constexpr (std::is_same_v<T, std::string>) {
    return v;
  } else if constexpr (std::is_same_v<T, double>) {
    return format_double(v);
  } else if constexpr (std::is_same_v<T, bool>) {
    return v ? "true" : "false";
  } else if constexpr (std::is_integral_v<T>) {
    return std::to_string(v);
  } else {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out += ',';
      out += to_text(v[i]);
    }
    return out;
  }
}

template <typename T>
struct is_vector : std::false_type {};
template <typename T>
struct is_vector<std::vector<T>> : std::true_type {};

// Keeps, per subcommand, a printer for every option so the effective
// configuration can be echoed after defaults are resolved.
class Registry {
 public:
  explicit Registry(CLI::App* app) : app_(app) {}

  template <typename T>
  CLI::Option* add(const std::string& name, T& var, const std::string& help) {
    CLI::Option* opt = app_->add_option("--" + name, var, help)->capture_default_str();
    if constexpr (is_vector<T>::value) opt->delimiter(',');
    printers_.emplace_back(name, [&var] { return to_text(var); });
    return opt;
  }

  bool given(const std::string& name) const {
    return app_->get_option("--" + name)->count() > 0;
  }

  std::string echo() const {
    std::string out;
    for (const auto& [name, print] : printers_) out += name + " = " + print() + "\n";
    return out;
  }

  CLI::App* app() const { return app_; }

 private:
  CLI::App* app_;
  std::vector<std::pair<std::string, std::function<std::string()>>> printers_;
};

struct Context {
  std::string out_dir;
  std::ostream* out = nullptr;

  fs::path resolve(const std::string& given, const std::string& default_relative) const {
    return given.empty() ? fs::path(out_dir) / default_relative : fs::path(given);
  }
};

std::string default_out_dir() {
  const char* env = std::getenv("POPSYNTH_OUT");
  return env && *env ? std::string(env) : std::string("popsynth-out");
}

RawTable load_table(const fs::path& path) { return to_raw_table(read_csv(path)); }

Schema load_schema(const fs::path& path) { return Schema::from_json(read_file(path)); }

std::optional<RegionFilter> parse_region(const std::string& text) {
  if (text.empty()) return std::nullopt;
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == text.size()) {
    throw ConfigError("region must look like VARIABLE=VALUE, got '" + text + "'");
  }
  return RegionFilter{text.substr(0, eq), text.substr(eq + 1)};
}

RawTable filter_rows(const RawTable& table, const RegionFilter& region) {
  const auto col = table.find(region.variable);
  if (!col) throw ConfigError("region variable '" + region.variable + "' is not a column");
  RawTable out;
  out.names = table.names;
  out.columns.assign(table.n_columns(), {});
  for (std::size_t r = 0; r < table.n_rows(); ++r) {
    const Cell& c = table.columns[*col][r];
    if (!c || *c != region.value) continue;
    for (std::size_t j = 0; j < table.n_columns(); ++j) {
      out.columns[j].push_back(table.columns[j][r]);
    }
  }
  if (out.n_rows() == 0) {
    throw DataError("no rows have " + region.variable + "=" + region.value);
  }
  return out;
}

void write_echo(const Context& ctx, const Registry& reg, const std::string& command) {
  write_file_atomic(fs::path(ctx.out_dir) / "reports" / (command + ".conf"),
                    "# effective configuration for `" + command + "`\n" + reg.echo());
}

void write_json(const fs::path& path, const Json& j) {
  write_file_atomic(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------- training

struct TrainOptions {
  std::string profile = "default";
  double learning_rate = 1e-5;
  std::size_t batch_size = 300;
  std::size_t iterations = 300;
  std::size_t latent_dim = 100;
  double gp_lambda = 10.0;
  std::size_t n_critic = 5;
  std::string optimizer = "adam";
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::uint64_t seed = 0;
  std::vector<long> widths = {100, 150, 150, 100};

  void add(Registry& reg) {
    reg.add("profile", profile, "default, finland or greece; sets lr, batch and iterations")
        ->check(CLI::IsMember({"default", "finland", "greece"}));
    reg.add("learning-rate", learning_rate, "optimizer step size");
    reg.add("batch-size", batch_size, "records per minibatch");
    reg.add("iterations", iterations, "generator updates");
    reg.add("latent-dim", latent_dim, "generator noise width");
    reg.add("gp-lambda", gp_lambda, "gradient penalty weight");
    reg.add("n-critic", n_critic, "critic updates per generator update");
    reg.add("optimizer", optimizer, "adam or rmsprop")
        ->check(CLI::IsMember({"adam", "rmsprop"}));
    reg.add("beta1", beta1, "Adam first-moment decay");
    reg.add("beta2", beta2, "Adam second-moment decay");
    reg.add("seed", seed, "random seed");
    reg.add("widths", widths, "critic1,critic2,generator1,generator2 hidden widths");
  }

  // Profile values apply to the fields not set explicitly.
  TrainConfig resolve(const Registry& reg) {
    if (profile != "default") {
      const TrainConfig p =
          profile == "finland" ? TrainConfig::finland_profile() : TrainConfig::greece_profile();
      if (!reg.given("learning-rate")) learning_rate = p.learning_rate;
      if (!reg.given("batch-size")) batch_size = p.batch_size;
      if (!reg.given("iterations")) iterations = p.iterations;
    }
    if (widths.size() != 4) throw ConfigError("--widths needs four values");
    for (long w : widths) {
      if (w <= 0) throw ConfigError("--widths must be positive");
    }
    TrainConfig c;
    c.learning_rate = learning_rate;
    c.batch_size = batch_size;
    c.iterations = iterations;
    c.latent_dim = latent_dim;
    c.gp_lambda = gp_lambda;
    c.n_critic = n_critic;
    c.optimizer = nn::parse_optimizer(optimizer);
    c.beta1 = beta1;
    c.beta2 = beta2;
    c.seed = seed;
    c.shape = {widths[0], widths[1], widths[2], widths[3]};
    c.validate();
    return c;
  }
};

void run_trainer(Trainer& trainer, std::size_t iterations, std::ostream& out,
                 const std::string& label) {
  const std::size_t every = std::max<std::size_t>(1, iterations / 10);
  while (trainer.iteration() < iterations) {
    trainer.step();
    const std::size_t it = trainer.iteration();
    if (it % every == 0 || it == iterations) {
      const LossRecord& r = trainer.loss_log().back();
      out << label << " iteration " << it << "/" << iterations
          << " critic=" << format_double(r.critic)
          << " generator=" << format_double(r.generator) << " gp=" << format_double(r.gp)
          << "\n";
    }
  }
}

// ---------------------------------------------------------------- toycensus

struct ToyOptions {
  std::size_t n = 5000;
  std::uint64_t seed = 0;
  std::string weights = "lognormal";
  double weight_constant = 1.0;
  double weight_mu = 3.0;
  double weight_sigma = 1.0;
  double weight_min = 1.0;
  double weight_max = 260.0;
  std::string weight_column = "weight";
  std::string output;
  std::string truth;
};

void cmd_toycensus(const Context& ctx, ToyOptions& o, const Registry& reg) {
  ToySpec spec = ToySpec::census(o.n, o.seed);
  spec.weights.kind = parse_weight_kind(o.weights);
  spec.weights.constant = o.weight_constant;
  spec.weights.mu = o.weight_mu;
  spec.weights.sigma = o.weight_sigma;
  spec.weights.min = o.weight_min;
  spec.weights.max = o.weight_max;
  o.output = ctx.resolve(o.output, "populations/toy.csv").string();
  o.truth = ctx.resolve(o.truth, "populations/toy_joint.json").string();
  const ToyDataset toy = generate_toy(spec);
  write_csv(o.output, toy_csv(toy, o.weight_column));
  write_file_atomic(o.truth, joint_json(toy));
  write_echo(ctx, reg, "toycensus");
  *ctx.out << "toycensus: " << toy.data.records.size() << " records -> " << o.output << "\n";
}

// ---------------------------------------------------------------- prepare

struct PrepareOptions {
  std::string input;
  std::string weight_column = "weight";
  double max_missing = 0.5;
  std::string bins;
  std::string impute = "knn";
  std::size_t knn_k = 5;
  std::size_t max_categories = 20;
  std::string region;
  std::string output;
  std::string schema;
};

void cmd_prepare(const Context& ctx, PrepareOptions& o, const Registry& reg) {
  if (o.input.empty()) throw ConfigError("prepare needs --input");
  o.output = ctx.resolve(o.output, "populations/prepared.csv").string();
  o.schema = ctx.resolve(o.schema, "schema/schema.json").string();
  RawTable table = load_table(o.input);
  const std::size_t rows_in = table.n_rows();
  const auto region = parse_region(o.region);
  if (region) table = filter_rows(table, *region);

  std::optional<Column> weights;
  if (!o.weight_column.empty()) {
    if (auto idx = table.find(o.weight_column)) {
      weights = table.columns[*idx];
      table.columns.erase(table.columns.begin() + static_cast<std::ptrdiff_t>(*idx));
      table.names.erase(table.names.begin() + static_cast<std::ptrdiff_t>(*idx));
      for (std::size_t r = 0; r < weights->size(); ++r) {
        if (!(*weights)[r]) {
          throw DataError("row " + std::to_string(r + 1) + ": missing weight");
        }
      }
    }
  }

  DropResult dropped = drop_sparse_columns(table, o.max_missing);
  table = std::move(dropped.table);
  if (table.n_columns() == 0) throw DataError("every column was dropped as too sparse");

  InferOptions infer;
  infer.max_categories = o.max_categories;
  std::vector<std::string> binned;
  if (!o.bins.empty()) {
    for (const BinSpec& spec : parse_bin_specs(read_file(o.bins))) {
      const auto idx = table.find(spec.variable);
      if (!idx) {
        const bool was_dropped =
            std::any_of(dropped.dropped.begin(), dropped.dropped.end(),
                        [&](const DroppedColumn& d) { return d.name == spec.variable; });
        if (was_dropped) continue;
        throw DataError("bin spec names unknown column '" + spec.variable + "'");
      }
      table.columns[*idx] = bin_numeric(table.columns[*idx], spec);
      infer.overrides[spec.variable].bin_labels = spec.labels;
      binned.push_back(spec.variable);
    }
  }

  const std::size_t missing = table.total_missing();
  if (o.impute == "mode") {
    table = impute_mode(table);
  } else if (o.impute == "knn") {
    if (missing > 0) table = impute_knn(table, o.knn_k);
  } else if (missing > 0) {
    throw DataError(std::to_string(missing) + " missing cells remain and --impute is none");
  }

  const Schema schema = infer_schema(table, infer);
  const std::vector<Record> records = records_from_table(table, schema);
  CsvTable csv = records_to_csv(records, schema);
  if (weights) {
    csv.header.push_back(o.weight_column);
    for (std::size_t r = 0; r < csv.rows.size(); ++r) csv.rows[r].push_back(*(*weights)[r]);
  }
  write_csv(o.output, csv);
  write_file_atomic(o.schema, schema.to_json());
  write_csv(fs::path(ctx.out_dir) / "reports" / "dropped_columns.csv",
            dropped_columns_csv(dropped.dropped));

  Json summary;
  summary["rows_in"] = rows_in;
  summary["rows_out"] = records.size();
  summary["region"] = o.region;
  summary["region_extraction"] = region ? "before_weighting" : "none";
  Json dropped_names = Json::array();
  for (const auto& d : dropped.dropped) dropped_names.push_back(d.name);
  summary["dropped_columns"] = dropped_names;
  summary["binned_columns"] = binned;
  summary["imputed_cells"] = missing;
  summary["impute"] = o.impute;
  summary["variables"] = schema.size();
  summary["feature_dim"] = schema.feature_dim();
  write_json(fs::path(ctx.out_dir) / "reports" / "prepare.json", summary);
  write_echo(ctx, reg, "prepare");
  *ctx.out << "prepare: " << records.size() << " records, " << schema.size()
           << " variables, feature width " << schema.feature_dim() << " -> " << o.output
           << "\n";
}

// ---------------------------------------------------------------- balance

struct BalanceOptions {
  std::string input;
  std::string schema;
  std::string weight_column = "weight";
  std::string approach = "duplicate";
  double reduction_factor = 1.0;
  std::string marginals;
  double scale = 0.0;
  std::size_t target_total = 0;
  std::string pool_checkpoint;
  std::size_t pool_size = 0;
  std::string decode = "sample";
  std::string region;
  std::string output;
  TrainOptions train;
};

void cmd_balance(const Context& ctx, BalanceOptions& o, const Registry& reg) {
  o.input = ctx.resolve(o.input, "populations/prepared.csv").string();
  o.schema = ctx.resolve(o.schema, "schema/schema.json").string();
  o.output = ctx.resolve(o.output, "populations/balanced.csv").string();
  const TrainConfig train_config = o.train.resolve(reg);
  const Schema schema = load_schema(o.schema);
  const RawTable table = load_table(o.input);
  const auto region = parse_region(o.region);
  if (region) schema.index_of(region->variable);

  Json summary;
  summary["approach"] = o.approach;
  summary["rows_in"] = table.n_rows();
  BalancedDataset balanced;
  if (o.approach == "none") {
    balanced.records = records_from_table(table, schema);
    balanced.provenance.assign(balanced.records.size(), Provenance::kOriginal);
  } else if (o.approach == "duplicate") {
    const WeightedDataset ds = weighted_dataset_from_table(table, schema, o.weight_column);
    const auto ints = integerize_weights(ds.weights, o.reduction_factor);
    balanced = duplicate_by_weights(ds.records, ints);
    summary["reduction_factor"] = o.reduction_factor;
    summary["integer_weight_min"] = *std::min_element(ints.begin(), ints.end());
    summary["integer_weight_max"] = *std::max_element(ints.begin(), ints.end());
  } else {
    if (o.marginals.empty()) throw ConfigError("wgan-impute needs --marginals");
    const std::vector<Record> originals = records_from_table(table, schema);
    const MarginalTable marginals = marginal_table_from_csv(read_csv(o.marginals));
    marginals.validate(schema);
    double scale = o.scale;
    if (scale <= 0.0) scale = o.target_total > 0 ? scale_for_total(marginals, o.target_total) : 1.0;
    const DeficitReport deficits = compute_deficits(originals, schema, marginals, scale);

    Generator generator;
    if (!o.pool_checkpoint.empty() && fs::exists(o.pool_checkpoint)) {
      const Checkpoint cp = load_checkpoint(o.pool_checkpoint);
      check_schema(cp, schema);
      generator = cp.state.generator;
      summary["pool_generator"] = "loaded";
    } else {
      Trainer trainer(encode(originals, schema), train_config);
      run_trainer(trainer, train_config.iterations, *ctx.out, "balance: pool");
      const fs::path path = ctx.resolve(o.pool_checkpoint, "models/pool_checkpoint.json");
      save_checkpoint(path, make_checkpoint(trainer, schema));
      generator = trainer.generator();
      summary["pool_generator"] = "trained";
    }
    const std::size_t pool_size =
        o.pool_size > 0 ? o.pool_size
                        : std::max<std::size_t>(
                              1000, 20 * static_cast<std::size_t>(deficits.total_deficit()));
    const DecodeOptions decode{parse_decode_mode(o.decode), 0.5};
    const std::vector<Record> pool =
        sample(generator, pool_size, schema, decode, Rng::derive_seed(train_config.seed, 2));
    ImputeResult result =
        wgan_impute(originals, pool, schema, marginals, scale, Rng::derive_seed(train_config.seed, 3));
    write_csv(fs::path(ctx.out_dir) / "reports" / "shortfall.csv",
              shortfall_csv(result.shortfall, marginals.key_variables));
    write_csv(fs::path(ctx.out_dir) / "reports" / "balance_cells.csv",
              shortfall_csv(result.fills, marginals.key_variables));
    summary["scale"] = scale;
    summary["pool_size"] = pool_size;
    summary["total_deficit"] = result.deficits.total_deficit();
    summary["unmatched_records"] = result.deficits.unmatched;
    summary["shortfall_cells"] = result.shortfall.size();
    balanced = std::move(result.dataset);
  }

  if (region) {
    const std::size_t idx = schema.index_of(region->variable);
    BalancedDataset kept;
    for (std::size_t i = 0; i < balanced.records.size(); ++i) {
      if (balanced.records[i].values[idx] != region->value) continue;
      kept.records.push_back(balanced.records[i]);
      kept.provenance.push_back(balanced.provenance[i]);
    }
    if (kept.records.empty()) {
      throw DataError("no balanced records have " + region->variable + "=" + region->value);
    }
    balanced = std::move(kept);
  }
  summary["region"] = o.region;
  summary["region_extraction"] = region ? "after_weighting" : "none";
  summary["rows_out"] = balanced.records.size();
  summary["original"] = balanced.count(Provenance::kOriginal);
  summary["duplicate"] = balanced.count(Provenance::kDuplicate);
  summary["generated"] = balanced.count(Provenance::kGenerated);

  write_csv(o.output, balanced_csv(balanced, schema));
  write_json(fs::path(ctx.out_dir) / "reports" / "balance.json", summary);
  write_echo(ctx, reg, "balance");
  *ctx.out << "balance: " << o.approach << " " << table.n_rows() << " -> "
           << balanced.records.size() << " records -> " << o.output << "\n";
}

// ---------------------------------------------------------------- train

struct TrainCommandOptions {
  std::string input;
  std::string schema;
  std::string checkpoint;
  std::string loss_log;
  std::string resume;
  TrainOptions train;
};

void cmd_train(const Context& ctx, TrainCommandOptions& o, const Registry& reg) {
  o.input = ctx.resolve(o.input, "populations/balanced.csv").string();
  o.schema = ctx.resolve(o.schema, "schema/schema.json").string();
  o.checkpoint = ctx.resolve(o.checkpoint, "models/checkpoint.json").string();
  o.loss_log = ctx.resolve(o.loss_log, "reports/loss_log.csv").string();
  TrainConfig config = o.train.resolve(reg);
  const Schema schema = load_schema(o.schema);
  const std::vector<Record> records = records_from_table(load_table(o.input), schema);
  EncodedMatrix data = encode(records, schema);

  std::unique_ptr<Trainer> trainer;
  if (!o.resume.empty()) {
    Checkpoint cp = load_checkpoint(o.resume);
    check_schema(cp, schema);
    cp.config.iterations = config.iterations;
    trainer = std::make_unique<Trainer>(resume_training(cp, std::move(data)));
  } else {
    trainer = std::make_unique<Trainer>(std::move(data), config);
  }
  run_trainer(*trainer, trainer->config().iterations, *ctx.out, "train:");
  save_checkpoint(o.checkpoint, make_checkpoint(*trainer, schema));
  write_csv(o.loss_log, loss_log_csv(trainer->loss_log()));
  write_echo(ctx, reg, "train");
  *ctx.out << "train: " << trainer->iteration() << " iterations on " << records.size()
           << " records -> " << o.checkpoint << "\n";
}

// ---------------------------------------------------------------- generate

struct GenerateOptions {
  std::string checkpoint;
  std::string schema;
  std::size_t n = 0;
  std::string region;
  std::string decode = "sample";
  std::uint64_t seed = 0;
  double min_acceptance = 1e-3;
  std::size_t acceptance_check_draws = 1'000'000;
  std::string output;
};

void cmd_generate(const Context& ctx, GenerateOptions& o, const Registry& reg) {
  o.checkpoint = ctx.resolve(o.checkpoint, "models/checkpoint.json").string();
  o.schema = ctx.resolve(o.schema, "schema/schema.json").string();
  o.output = ctx.resolve(o.output, "populations/synthetic.csv").string();
  const Schema schema = load_schema(o.schema);
  const Checkpoint cp = load_checkpoint(o.checkpoint);
  check_schema(cp, schema);
  PopulationRequest request;
  request.target = o.n > 0 ? o.n : cp.n_train_rows;
  request.region = parse_region(o.region);
  request.min_acceptance = o.min_acceptance;
  request.acceptance_check_draws = o.acceptance_check_draws;
  const DecodeOptions decode{parse_decode_mode(o.decode), 0.5};
  const PopulationResult result =
      generate_population(cp.state.generator, schema, request, decode, o.seed);
  write_csv(o.output, records_to_csv(result.records, schema));

  Json summary;
  summary["target"] = request.target;
  summary["records"] = result.records.size();
  summary["draws"] = result.draws;
  summary["acceptance_rate"] =
      static_cast<double>(result.records.size()) / static_cast<double>(result.draws);
  summary["region"] = o.region;
  summary["region_extraction"] = request.region ? "after_generation" : "none";
  summary["decode"] = o.decode;
  write_json(fs::path(ctx.out_dir) / "reports" / "generate.json", summary);
  write_echo(ctx, reg, "generate");
  *ctx.out << "generate: " << result.records.size() << " records from " << result.draws
           << " draws -> " << o.output << "\n";
}

// ---------------------------------------------------------------- validate

struct CompareOptions {
  std::string original;
  std::string synthetic;
  std::string schema;
  std::vector<std::string> exclude = {"weight", "provenance"};
};

// The schema file when it exists, else inferred from the original table.
Schema comparison_schema(const Context& ctx, CompareOptions& o, const RawTable& original) {
  const fs::path path = ctx.resolve(o.schema, "schema/schema.json");
  if (!o.schema.empty() || fs::exists(path)) {
    o.schema = path.string();
    return load_schema(path);
  }
  InferOptions infer;
  for (const auto& name : o.exclude) {
    if (original.find(name)) infer.exclude.push_back(name);
  }
  return infer_schema(original, infer);
}

struct ValidateOptions {
  CompareOptions compare;
  std::vector<std::size_t> orders = {1, 2};
  std::vector<std::string> variables;
  std::string report;
};

void cmd_validate(const Context& ctx, ValidateOptions& o, const Registry& reg) {
  if (o.compare.original.empty() || o.compare.synthetic.empty()) {
    throw ConfigError("validate needs --original and --synthetic");
  }
  o.report = ctx.resolve(o.report, "reports/validation.json").string();
  const RawTable original_table = load_table(o.compare.original);
  const Schema schema = comparison_schema(ctx, o.compare, original_table);
  const auto original = records_from_table(original_table, schema);
  const auto synthetic = records_from_table(load_table(o.compare.synthetic), schema);
  const ValidationReport report =
      validate_populations(original, synthetic, schema, o.orders, o.variables);

  write_file_atomic(o.report, validation_report_json(report));
  const fs::path dir = fs::path(o.report).parent_path();
  for (const MetricSet& m : report.metrics) {
    const std::string suffix = "_order" + std::to_string(m.order);
    write_csv(dir / ("cells" + suffix + ".csv"), cells_csv(m));
    write_file_atomic(dir / ("scatter" + suffix + ".svg"), scatter_svg(m));
    if (m.bland_altman) {
      write_file_atomic(dir / ("bland_altman" + suffix + ".svg"), bland_altman_svg(m));
    }
    *ctx.out << "validate: order " << m.order << " cells=" << m.original.cells.size()
             << " srmse=" << format_double(m.srmse)
             << " pearson=" << (m.pearson ? format_double(*m.pearson) : "undefined")
             << " r_squared=" << (m.r_squared ? format_double(*m.r_squared) : "undefined")
             << " outliers="
             << (m.bland_altman ? std::to_string(m.bland_altman->outliers.size()) : "-")
             << "\n";
  }
  write_echo(ctx, reg, "validate");
}

// ---------------------------------------------------------------- audit

struct AuditOptions {
  CompareOptions compare;
  std::vector<std::string> key_variables;
  std::string target;
  std::size_t top_k = 5;
  double under = 0.8;
  double over = 1.25;
  std::string report;
};

void cmd_audit(const Context& ctx, AuditOptions& o, const Registry& reg) {
  if (o.compare.original.empty() || o.compare.synthetic.empty()) {
    throw ConfigError("audit needs --original and --synthetic");
  }
  if (o.key_variables.empty() || o.target.empty()) {
    throw ConfigError("audit needs --key-variables and --target");
  }
  o.report = ctx.resolve(o.report, "reports/fringe.json").string();
  const RawTable original_table = load_table(o.compare.original);
  const Schema schema = comparison_schema(ctx, o.compare, original_table);
  const auto original = records_from_table(original_table, schema);
  const auto synthetic = records_from_table(load_table(o.compare.synthetic), schema);
  const FringeAuditReport report = fringe_audit(original, synthetic, schema, o.key_variables,
                                                o.target, o.top_k, {o.under, o.over});
  write_file_atomic(o.report, fringe_report_json(report));
  write_csv(fs::path(o.report).replace_extension(".csv"), fringe_csv(report));
  write_echo(ctx, reg, "audit");
  *ctx.out << "audit: " << report.key_cells.size() << " key cells, "
           << report.flagged(FringeFlag::kOver) << " over-represented, "
           << report.flagged(FringeFlag::kUnder) << " under-represented -> " << o.report
           << "\n";
}

// ---------------------------------------------------------------- wiring

void add_compare(Registry& reg, CompareOptions& o) {
  reg.add("original", o.original, "reference CSV");
  reg.add("synthetic", o.synthetic, "CSV to compare against the reference");
  reg.add("schema", o.schema, "schema JSON (default <out>/schema/schema.json, else inferred)");
  reg.add("exclude", o.exclude, "columns ignored when the schema is inferred");
}

// Pulls `--config FILE` out of args and splices the file's entries in
// front of the remaining options so the command line wins. Empty values
// mean "default" and are skipped.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> rest;
  std::optional<std::string> config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw ConfigError("--config needs a file");
      config_path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (!config_path) return rest;
  if (rest.empty() || rest[0].rfind("-", 0) == 0) {
    throw ConfigError("--config must follow a subcommand");
  }
  std::vector<std::string> out = {rest[0]};
  for (const auto& [key, value] : parse_config(read_file(*config_path))) {
    if (!value.empty()) out.push_back("--" + key + "=" + value);
  }
  out.insert(out.end(), rest.begin() + 1, rest.end());
  return out;
}

int report_error(std::ostream& err, const char* kind, const std::string& what, int code) {
  std::string msg = what;
  std::replace(msg.begin(), msg.end(), '\n', ' ');
  err << "error[" << kind << "]: " << msg << "\n";
  return code;
}

}  // namespace

std::map<std::string, std::string> parse_config(std::string_view text) {
  std::map<std::string, std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(number) + " has no '='");
    }
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    if (key.empty()) throw ConfigError("config line " + std::to_string(number) + " has no key");
    if (!out.emplace(key, value).second) {
      throw ConfigError("config key '" + key + "' appears twice");
    }
  }
  return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Synthetic population toolkit: WGAN-GP over weighted categorical survey data.",
               "popsynth"};
  app.footer(kConfigHelp);
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  Context ctx;
  ctx.out_dir = default_out_dir();
  ctx.out = &out;
  std::function<void()> action;
  std::vector<std::unique_ptr<Registry>> registries;

  auto subcommand = [&](const std::string& name, const std::string& help) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->footer(kConfigHelp);
    sub->add_option("--config", "key = value file with option defaults");
    registries.push_back(std::make_unique<Registry>(sub));
    Registry& reg = *registries.back();
    reg.add("out", ctx.out_dir, "output root (env POPSYNTH_OUT)");
    return &reg;
  };

  ToyOptions toy;
  {
    Registry& r = *subcommand("toycensus", "write a seeded toy survey dataset and its exact joint");
    r.add("n", toy.n, "records");
    r.add("seed", toy.seed, "random seed");
    r.add("weights", toy.weights, "constant, uniform or lognormal")
        ->check(CLI::IsMember({"constant", "uniform", "lognormal"}));
    r.add("weight-constant", toy.weight_constant, "weight for --weights constant");
    r.add("weight-mu", toy.weight_mu, "lognormal mu");
    r.add("weight-sigma", toy.weight_sigma, "lognormal sigma");
    r.add("weight-min", toy.weight_min, "lower weight clip / uniform lower bound");
    r.add("weight-max", toy.weight_max, "upper weight clip / uniform upper bound");
    r.add("weight-column", toy.weight_column, "name of the weight column");
    r.add("output", toy.output, "dataset CSV (default <out>/populations/toy.csv)");
    r.add("truth", toy.truth, "joint JSON (default <out>/populations/toy_joint.json)");
    r.app()->callback([&, reg = &r] { action = [&, reg] { cmd_toycensus(ctx, toy, *reg); }; });
  }

  PrepareOptions prep;
  {
    Registry& r = *subcommand("prepare", "drop sparse columns, bin, impute and infer a schema");
    r.add("input", prep.input, "raw survey CSV")->required();
    r.add("weight-column", prep.weight_column, "carried through untouched when present");
    r.add("max-missing", prep.max_missing, "drop columns missing more than this fraction");
    r.add("bins", prep.bins, "JSON bin specs for numeric columns");
    r.add("impute", prep.impute, "knn, mode or none")
        ->check(CLI::IsMember({"knn", "mode", "none"}));
    r.add("knn-k", prep.knn_k, "neighbours for knn imputation");
    r.add("max-categories", prep.max_categories,
          "numeric columns with more distinct values need bins");
    r.add("region", prep.region, "VARIABLE=VALUE rows to keep before weighting");
    r.add("output", prep.output, "cleaned CSV (default <out>/populations/prepared.csv)");
    r.add("schema", prep.schema, "schema JSON (default <out>/schema/schema.json)");
    r.app()->callback([&, reg = &r] { action = [&, reg] { cmd_prepare(ctx, prep, *reg); }; });
  }

  BalanceOptions bal;
  {
    Registry& r = *subcommand("balance", "balance by weight duplication or WGAN imputation");
    r.add("input", bal.input, "prepared CSV (default <out>/populations/prepared.csv)");
    r.add("schema", bal.schema, "schema JSON (default <out>/schema/schema.json)");
    r.add("weight-column", bal.weight_column, "person weight column");
    r.add("approach", bal.approach, "duplicate, wgan-impute or none")
        ->check(CLI::IsMember({"duplicate", "wgan-impute", "none"}));
    r.add("reduction-factor", bal.reduction_factor, "weights are divided by this first");
    r.add("marginals", bal.marginals, "marginal table CSV for wgan-impute");
    r.add("scale", bal.scale, "multiplier on marginal counts (0: from --target-total)");
    r.add("target-total", bal.target_total, "desired total of the scaled marginals");
    r.add("pool-checkpoint", bal.pool_checkpoint,
          "pool generator checkpoint; trained and saved here when absent");
    r.add("pool-size", bal.pool_size, "pool records (0: 20x the total deficit)");
    r.add("decode", bal.decode, "sample or argmax")->check(CLI::IsMember({"sample", "argmax"}));
    r.add("region", bal.region, "VARIABLE=VALUE records to keep after weighting");
    r.add("output", bal.output, "balanced CSV (default <out>/populations/balanced.csv)");
    bal.train.add(r);
    r.app()->callback([&, reg = &r] { action = [&, reg] { cmd_balance(ctx, bal, *reg); }; });
  }

  TrainCommandOptions tr;
  {
    Registry& r = *subcommand("train", "train the WGAN-GP and write a checkpoint");
    r.add("input", tr.input, "training CSV (default <out>/populations/balanced.csv)");
    r.add("schema", tr.schema, "schema JSON (default <out>/schema/schema.json)");
    r.add("checkpoint", tr.checkpoint, "output (default <out>/models/checkpoint.json)");
    r.add("loss-log", tr.loss_log, "loss CSV (default <out>/reports/loss_log.csv)");
    r.add("resume", tr.resume, "continue from this checkpoint up to --iterations");
    tr.train.add(r);
    r.app()->callback([&, reg = &r] { action = [&, reg] { cmd_train(ctx, tr, *reg); }; });
  }

  GenerateOptions gen;
  {
    Registry& r = *subcommand("generate", "sample a synthetic population from a checkpoint");
    r.add("checkpoint", gen.checkpoint, "checkpoint (default <out>/models/checkpoint.json)");
    r.add("schema", gen.schema, "schema JSON (default <out>/schema/schema.json)");
    r.add("n", gen.n, "records to keep (0: training row count)");
    r.add("region", gen.region, "VARIABLE=VALUE acceptance filter");
    r.add("decode", gen.decode, "sample or argmax")->check(CLI::IsMember({"sample", "argmax"}));
    r.add("seed", gen.seed, "random seed");
    r.add("min-acceptance", gen.min_acceptance, "abort below this accepted fraction");
    r.add("acceptance-check-draws", gen.acceptance_check_draws,
          "draws before the acceptance floor is enforced");
    r.add("output", gen.output, "population CSV (default <out>/populations/synthetic.csv)");
    r.app()->callback([&, reg = &r] { action = [&, reg] { cmd_generate(ctx, gen, *reg); }; });
  }

  ValidateOptions val;
  {
    Registry& r = *subcommand("validate", "SRMSE, Pearson, R-squared and Bland-Altman");
    add_compare(r, val.compare);
    r.add("orders", val.orders, "contingency orders, comma separated");
    r.add("variables", val.variables, "variables to include (default all)");
    r.add("report", val.report, "report JSON (default <out>/reports/validation.json)");
    r.app()->callback([&, reg = &r] { action = [&, reg] { cmd_validate(ctx, val, *reg); }; });
  }

  AuditOptions aud;
  {
    Registry& r = *subcommand("audit", "fringe-group representation audit");
    add_compare(r, aud.compare);
    r.add("key-variables", aud.key_variables, "key variables, comma separated");
    r.add("target", aud.target, "audited variable");
    r.add("top-k", aud.top_k, "most populated key cells to audit");
    r.add("under", aud.under, "flag ratios below this");
    r.add("over", aud.over, "flag ratios above this");
    r.add("report", aud.report, "report JSON (default <out>/reports/fringe.json)");
    r.app()->callback([&, reg = &r] { action = [&, reg] { cmd_audit(ctx, aud, *reg); }; });
  }

  try {
    std::vector<std::string> argv = expand_config(args);
    std::reverse(argv.begin(), argv.end());
    app.parse(argv);
    if (action) action();
    return kOk;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    return report_error(err, "config", e.what(), kConfigError);
  } catch (const ConfigError& e) {
    return report_error(err, "config", e.what(), kConfigError);
  } catch (const DataError& e) {
    return report_error(err, "data", e.what(), kDataError);
  } catch (const NumericError& e) {
    return report_error(err, "numeric", e.what(), kNumericError);
  } catch (const std::exception& e) {
    return report_error(err, "internal", e.what(), kInternalError);
  }
}

}  // namespace popsynth::cli
