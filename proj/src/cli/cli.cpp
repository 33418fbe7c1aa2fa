#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "mvptm/cli.hpp"
#include "mvptm/engine.hpp"
#include "mvptm/error.hpp"

namespace mvptm::cli {

using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kDataError = 1;
constexpr int kUsage = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::FileNotFound, "cannot write " + path);
  out << text;
}

// Raw Devign-style records, or extraction output when `from_views` is set.
std::vector<views::ViewRecord> load_records(const std::string& path, bool from_views, std::size_t max_len,
                                            std::ostream& err) {
  if (from_views) {
    auto report = corpus::load_view_jsonl(path);
    if (report.skipped_lines > 0) err << "warning: " << path << ": skipped " << report.skipped_lines << " line(s)\n";
    return std::move(report.records);
  }
  const auto loaded = corpus::load_jsonl(path);
  if (loaded.skipped_lines > 0) err << "warning: " << path << ": skipped " << loaded.skipped_lines << " line(s)\n";
  auto extracted = corpus::extract_views(loaded.records, max_len, false, std::thread::hardware_concurrency());
  if (extracted.dropped_long + extracted.dropped_unparseable > 0) {
    err << "note: " << path << ": dropped " << extracted.dropped_long << " over-length and "
        << extracted.dropped_unparseable << " unparseable function(s)\n";
  }
  if (extracted.records.empty()) throw Error(ErrorCode::EmptyDataset, "no usable functions in " + path);
  return std::move(extracted.records);
}

struct ExtractOpts {
  std::string in, out;
  std::size_t max_len = corpus::kMaxTokens;
  bool symmetrize = false;
  unsigned threads = 0;
};

int do_extract(const ExtractOpts& o, std::ostream& out, std::ostream& err) {
  const auto loaded = corpus::load_jsonl(o.in);
  const unsigned threads = o.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : o.threads;
  const auto report = corpus::extract_views(loaded.records, o.max_len, o.symmetrize, threads);
  corpus::write_view_jsonl(o.out, report.records);
  for (const auto& e : report.errors) err << "skipped " << e << '\n';
  out << json{{"lines_skipped", loaded.skipped_lines},
              {"records", loaded.records.size()},
              {"kept", report.records.size()},
              {"dropped_long", report.dropped_long},
              {"dropped_unparseable", report.dropped_unparseable}}
             .dump()
      << '\n';
  return kOk;
}

struct InspectOpts {
  std::string file, view = "ast", dot;
  bool matrix = false;
  bool symmetrize = false;
};

int do_inspect(const InspectOpts& o, std::ostream& out) {
  const auto kind = views::parse_view_kind(o.view);
  if (!kind || *kind == views::ViewKind::Seq) throw Error(ErrorCode::ConfigError, "--view must be ast, cfg or dfg");
  const auto fv = views::analyze(read_file(o.file));
  const auto& g = fv.graph(*kind);
  std::vector<std::string> texts;
  for (const auto& t : fv.tokens) texts.push_back(t.text);
  if (!o.dot.empty()) write_file(o.dot, views::export_dot(g, texts));
  if (o.matrix) out << views::format_matrix(g, o.symmetrize);
  if (!o.matrix && o.dot.empty()) out << views::export_dot(g, texts);
  return kOk;
}

struct TrainOpts {
  std::string train, valid, config, out, log;
  bool no_contrastive = false;
  bool from_views = false;
  std::vector<std::string> drop_views;
  std::optional<std::size_t> epochs, batch_size;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr, lambda, tau;
};

int do_train(const TrainOpts& o, std::ostream& out, std::ostream& err) {
  engine::RunConfig cfg;
  if (!o.config.empty()) cfg = engine::load_config(o.config);
  if (o.epochs) cfg.train.epochs = *o.epochs;
  if (o.batch_size) cfg.train.batch_size = *o.batch_size;
  if (o.seed) cfg.train.seed = *o.seed;
  if (o.lr) cfg.train.lr = *o.lr;
  if (o.lambda) cfg.loss.lambda = *o.lambda;
  if (o.tau) cfg.loss.tau = *o.tau;
  if (o.no_contrastive) cfg.loss.contrastive = false;
  for (const auto& v : o.drop_views) {
    const auto kind = views::parse_view_kind(v);
    if (!kind || *kind == views::ViewKind::Seq) throw Error(ErrorCode::ConfigError, "--drop-view must be ast, cfg or dfg");
    cfg.train.enabled_views[views::slot(*kind)] = false;
  }
  cfg.loss.validate();
  cfg.train.validate();

  const auto train_set = load_records(o.train, o.from_views, cfg.encoder.max_len, err);
  std::vector<views::ViewRecord> valid_set;
  if (!o.valid.empty()) valid_set = load_records(o.valid, o.from_views, cfg.encoder.max_len, err);

  std::ofstream log_file;
  if (!o.log.empty()) {
    log_file.open(o.log);
    if (!log_file) throw Error(ErrorCode::FileNotFound, "cannot write " + o.log);
  }
  std::ostream& log = o.log.empty() ? out : log_file;
  bool warned = false;
  const auto result = engine::train(cfg, train_set, valid_set, [&](const engine::EpochLog& e) {
    if (e.skipped_contrastive > 0 && !warned) {
      err << "warning: contrastive term skipped on batches of one sample\n";
      warned = true;
    }
    log << engine::to_json(e).dump() << '\n';
    log.flush();
    return true;
  });
  engine::save(result.best, o.out);
  err << "saved epoch " << result.best_epoch << " to " << o.out << '\n';
  return kOk;
}

int do_eval(const std::string& data, const std::string& model, bool from_views, std::ostream& out,
            std::ostream& err) {
  const auto ckpt = engine::load(model);
  const auto records = load_records(data, from_views, ckpt.config.encoder.max_len, err);
  out << engine::to_json(engine::evaluate(ckpt, records)).dump() << '\n';
  return kOk;
}

int do_gradcheck(bool full, std::ostream& out) {
  const auto cases = engine::gradcheck_suite(full);
  bool ok = true;
  double worst = 0.0;
  json report = json::array();
  for (const auto& c : cases) {
    ok = ok && c.passed();
    worst = std::max(worst, c.max_rel_error);
    report.push_back({{"name", c.name},
                      {"max_rel_error", c.max_rel_error},
                      {"tolerance", c.tolerance},
                      {"coordinates", c.coordinates},
                      {"passed", c.passed()}});
  }
  out << json{{"cases", report}, {"max_rel_error", worst}, {"passed", ok}}.dump(2) << '\n';
  return ok ? kOk : kDataError;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-view structure-aware vulnerability detector"};
  app.require_subcommand(1);

  ExtractOpts ex;
  auto* extract = app.add_subcommand("extract", "Lex, parse and build views for a JSONL corpus");
  extract->add_option("--in", ex.in, "Input JSONL (func, target)")->required();
  extract->add_option("--out", ex.out, "Output views JSONL")->required();
  extract->add_option("--max-len", ex.max_len, "Drop functions with more lexer tokens than this");
  extract->add_flag("--symmetrize", ex.symmetrize, "Add reverse CFG/DFG edges");
  extract->add_option("--threads", ex.threads, "Worker threads (0 = all cores)");

  InspectOpts in;
  auto* inspect = app.add_subcommand("inspect", "Show one view of a single function");
  inspect->add_option("--file", in.file, "C source file")->required();
  inspect->add_option("--view", in.view, "ast | cfg | dfg")->required();
  inspect->add_option("--dot", in.dot, "Write Graphviz DOT here");
  inspect->add_flag("--matrix", in.matrix, "Print the 0/1 adjacency matrix");
  inspect->add_flag("--symmetrize", in.symmetrize, "Symmetrize the printed matrix");

  TrainOpts tr;
  auto* train = app.add_subcommand("train", "Train and save the best checkpoint");
  train->add_option("--train", tr.train, "Training data")->required();
  train->add_option("--valid", tr.valid, "Validation data");
  train->add_option("--config", tr.config, "JSON config");
  train->add_option("--out", tr.out, "Checkpoint path")->required();
  train->add_option("--log", tr.log, "Per-epoch JSONL log (default stdout)");
  train->add_flag("--no-contrastive", tr.no_contrastive, "Train with the classification loss only");
  train->add_option("--drop-view", tr.drop_views, "Disable a structural view (repeatable)");
  train->add_flag("--from-views", tr.from_views, "Inputs are extraction output");
  train->add_option("--epochs", tr.epochs);
  train->add_option("--batch-size", tr.batch_size);
  train->add_option("--seed", tr.seed);
  train->add_option("--lr", tr.lr);
  train->add_option("--lambda", tr.lambda);
  train->add_option("--tau", tr.tau);

  std::string eval_data, eval_model;
  bool eval_views = false;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--data", eval_data, "Evaluation data")->required();
  eval->add_option("--model", eval_model, "Checkpoint")->required();
  eval->add_flag("--from-views", eval_views, "Data is extraction output");

  bool full = false;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  gradcheck->add_flag("--full", full, "Include the whole objective on a tiny model");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return kUsage;
  }

  try {
    if (*extract) return do_extract(ex, out, err);
    if (*inspect) return do_inspect(in, out);
    if (*train) return do_train(tr, out, err);
    if (*eval) return do_eval(eval_data, eval_model, eval_views, out, err);
    if (*gradcheck) return do_gradcheck(full, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::ConfigError ? kUsage : kDataError;
  }
  return kUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace mvptm::cli
