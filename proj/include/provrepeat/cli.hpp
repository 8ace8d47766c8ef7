#pragma once

// Command-line frontend. `run` parses arguments and dispatches; all output goes to the
// given streams so the commands can be driven in-process.

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "archive.hpp"
#include "dependency_inference.hpp"
#include "isomorphism.hpp"
#include "prov_graph.hpp"
#include "repeat_planner.hpp"
#include "store.hpp"
#include "strace.hpp"
#include "summarizer.hpp"
#include "trace_model.hpp"

namespace provrepeat::cli {

enum ExitCode : int { kOk = 0, kNotIsomorphic = 1, kUsage = 2, kDataError = 3 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline fs::path default_home() {
  if (const char* env = std::getenv("PROVREPEAT_HOME"); env && *env) return env;
  if (const char* home = std::getenv("HOME"); home && *home) return fs::path(home) / ".provrepeat";
  return ".provrepeat";
}

/// Workspace root: the chunk store plus `workspace.json` naming the current sciunit.
class Workspace {
 public:
  explicit Workspace(fs::path root) : root_(std::move(root)), store_(root_) { load(); }

  [[nodiscard]] const fs::path& root() const { return root_; }
  Store& store() { return store_; }
  [[nodiscard]] const std::string& current() const { return current_; }

  std::string require_current() const {
    if (current_.empty()) throw DataError("no current sciunit; run `provrepeat create <name>` first");
    return current_;
  }

  void create(const std::string& name) {
    Store::check_name(name);
    if (fs::exists(store_.sciunit_dir(name))) throw DataError("sciunit '" + name + "' already exists");
    fs::create_directories(store_.sciunit_dir(name) / "containers");
    select(name);
  }

  void select(const std::string& name) {
    current_ = name;
    nlohmann::json j = {{"current", current_}};
    auto text = j.dump(2) + "\n";
    provrepeat::detail::write_file_atomic(root_ / "workspace.json",
                              {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
  }

  [[nodiscard]] FileLock lock() const { return FileLock(root_ / ".workspace.lock"); }

  ContainerManifest load(std::optional<std::uint64_t> seq) const {
    auto name = require_current();
    auto seqs = store_.list_containers(name);
    if (seqs.empty()) throw DataError("sciunit '" + name + "' has no containers");
    auto s = seq.value_or(seqs.back());
    if (!std::binary_search(seqs.begin(), seqs.end(), s))
      throw DataError("unknown container " + std::to_string(s) + " in sciunit '" + name + "'");
    return store_.load_manifest(name, s);
  }

 private:
  void load() {
    auto p = root_ / "workspace.json";
    if (!fs::exists(p)) return;
    std::ifstream in(p);
    try {
      auto j = nlohmann::json::parse(in);
      current_ = j.value("current", "");
    } catch (const nlohmann::json::exception& e) {
      throw DataError("malformed workspace.json: " + std::string(e.what()));
    }
  }

  fs::path root_;
  Store store_;
  std::string current_;
};

namespace detail {

inline std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + p.string());
  out << text;
}

inline nlohmann::ordered_json graph_stats(const ProvenanceGraph& g) {
  return {{"activities", g.count(NodeKind::Activity)},
          {"entities", g.count(NodeKind::Entity)},
          {"edges", g.edges().size()}};
}

/// Process ids matching a selector: node id, recorded pid, or label.
inline IdSet resolve_procs(const ProvenanceGraph& g, const std::vector<std::string>& selectors) {
  IdSet out;
  for (const auto& sel : selectors) {
    bool found = false;
    for (const auto& n : g.nodes()) {
      if (n.kind != NodeKind::Activity) continue;
      auto pid = n.attrs.find("pid");
      if (n.id == sel || n.label == sel || (pid != n.attrs.end() && pid->second == sel)) {
        out.insert(n.id);
        found = true;
      }
    }
    if (!found) throw DataError("unknown process '" + sel + "'");
  }
  return out;
}

/// Input entities matching a path (absolute or container-relative) or a file label.
inline IdSet resolve_inputs(const ProvenanceGraph& g, const std::string& sel) {
  IdSet out;
  const auto want = container_path(sel);
  for (const auto& n : g.nodes()) {
    if (n.kind != NodeKind::Entity) continue;
    auto path = entity_file_path(n);
    if (path == want || n.id == sel || n.label == sel || provrepeat::detail::basename_of(path) == sel) out.insert(n.id);
  }
  if (out.empty()) throw DataError("unknown file '" + sel + "'");
  // Prefer the versions nobody generated: those are the run's inputs.
  IdSet inputs;
  for (const auto& id : out)
    if (g.neighbors(id, Direction::In, ProvLabel::WasGeneratedBy).empty()) inputs.insert(id);
  return inputs.empty() ? out : inputs;
}

inline std::vector<std::string> split_csv(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  for (const auto& item : items) {
    std::stringstream ss(item);
    std::string part;
    while (std::getline(ss, part, ','))
      if (!part.empty()) out.push_back(part);
  }
  return out;
}

inline std::string join(const IdSet& s) {
  std::string out;
  for (const auto& x : s) out += (out.empty() ? "" : " ") + x;
  return out.empty() ? "-" : out;
}

}  // namespace detail

struct Options {
  std::string home;
  bool json = false;
};

class Commands {
 public:
  Commands(const Options& opts, std::ostream& out, std::ostream& err)
      : opts_(opts), out_(out), err_(err), ws_(opts.home.empty() ? default_home() : fs::path(opts.home)) {}

  int create(const std::string& name) {
    auto lock = ws_.lock();
    ws_.create(name);
    if (opts_.json) out_ << nlohmann::json{{"created", name}}.dump() << "\n";
    else out_ << "created sciunit " << name << "\n";
    return kOk;
  }

  int list() {
    auto name = ws_.require_current();
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (auto seq : ws_.store().list_containers(name)) {
      auto m = ws_.store().load_manifest(name, seq);
      rows.push_back({{"seq", seq},
                      {"command", m.meta.count("command") ? m.meta.at("command") : ""},
                      {"created", m.created},
                      {"files", m.files.size()},
                      {"bytes", m.total_bytes()}});
    }
    if (opts_.json) {
      out_ << rows.dump(2) << "\n";
      return kOk;
    }
    out_ << std::left << std::setw(5) << "SEQ" << std::setw(24) << "COMMAND" << std::setw(22) << "CREATED"
         << std::setw(7) << "FILES" << "BYTES\n";
    for (const auto& r : rows)
      out_ << std::left << std::setw(5) << r["seq"].get<std::uint64_t>() << std::setw(24)
           << r["command"].get<std::string>() << std::setw(22) << r["created"].get<std::string>() << std::setw(7)
           << r["files"].get<std::size_t>() << r["bytes"].get<std::uint64_t>() << "\n";
    return kOk;
  }

  int show(std::optional<std::uint64_t> seq) {
    auto m = ws_.load(seq);
    nlohmann::ordered_json j = to_json(m);
    j.erase("provenance");
    j["provenance_stats"] = detail::graph_stats(m.provenance);
    if (opts_.json) {
      out_ << j.dump(2) << "\n";
      return kOk;
    }
    out_ << "container " << m.container_id() << " created " << m.created << "\n";
    for (const auto& [k, v] : m.meta) out_ << "  " << k << ": " << v << "\n";
    out_ << "  files: " << m.files.size() << " (" << m.total_bytes() << " bytes), missing: " << m.missing.size()
         << "\n";
    out_ << "  provenance: " << m.provenance.count(NodeKind::Activity) << " processes, "
         << m.provenance.count(NodeKind::Entity) << " files, " << m.provenance.edges().size() << " edges\n";
    return kOk;
  }

  int exec(const std::string& trace_file, const std::string& root, bool version_files, bool strace_input,
           const std::vector<std::string>& capture) {
    auto lock = ws_.lock();
    auto name = ws_.require_current();
    ExecutionTrace trace;
    std::string command;
    if (!capture.empty()) {
      trace = run_capture(capture);
      for (const auto& a : capture) command += (command.empty() ? "" : " ") + a;
    } else {
      auto text = detail::read_text(trace_file);
      trace = strace_input ? parse_strace(text) : parse_trace_log(std::string_view(text));
      command = fs::path(trace_file).filename().string();
    }
    if (version_files) trace = version_entities(trace);
    auto graph = infer_provenance(trace);
    auto cycles = detect_cycles(graph);
    if (!cycles.acyclic())
      err_ << "warning: provenance has " << cycles.cycles.size()
           << " cycle(s); rerun with --version-files to split conflicting files\n";

    std::vector<SourceFile> sources;
    std::set<std::string> seen;
    for (const auto& n : graph.nodes()) {
      if (n.kind != NodeKind::Entity) continue;
      auto rel = entity_file_path(n);
      if (!seen.insert(rel).second) continue;
      auto host = n.attrs.count("path") ? n.attrs.at("path") : n.id;
      sources.push_back({rel, root.empty() ? fs::path(host) : fs::path(root) / rel});
    }
    PutOptions po;
    po.meta = trace.meta;
    po.meta["command"] = command;
    auto m = ws_.store().put_files(name, sources, graph, po);
    for (const auto& miss : m.missing) err_ << "warning: missing file stored as metadata only: " << miss << "\n";
    if (opts_.json) {
      out_ << nlohmann::ordered_json{{"seq", m.seq},
                                     {"files", m.files.size()},
                                     {"missing", m.missing},
                                     {"new_bytes", ws_.store().last_put().new_bytes},
                                     {"provenance", detail::graph_stats(graph)}}
                  .dump(2)
           << "\n";
    } else {
      out_ << m.seq << "\n";
    }
    return kOk;
  }

  int ingest_strace(const std::string& log, const std::string& output) {
    auto trace = parse_strace(detail::read_text(log));
    auto text = serialize_trace(trace);
    if (output.empty() || output == "-") out_ << text;
    else detail::write_text(output, text);
    return kOk;
  }

  struct RepeatArgs {
    std::uint64_t seq = 0;
    std::vector<std::string> procs;
    std::vector<std::string> given;
    std::string descendants = "direct";
    bool execute = false;
    std::string workdir;
  };

  int repeat(const RepeatArgs& a) {
    auto m = ws_.load(a.seq);
    const auto& g = m.provenance;
    auto mode = a.descendants == "all" ? DescendantMode::All : DescendantMode::Direct;
    fs::path work = a.workdir.empty() ? ws_.root() / "work" / m.sciunit / std::to_string(m.seq) : fs::path(a.workdir);

    nlohmann::ordered_json report;
    SubContainerPlan plan;
    std::map<std::string, fs::path> replacements;  // container path -> host file
    if (!a.given.empty()) {
      IdSet changed;
      for (const auto& arg : a.given) {
        auto eq = arg.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == arg.size())
          throw UsageError("--given expects path=replacement, got '" + arg + "'");
        auto ids = detail::resolve_inputs(g, arg.substr(0, eq));
        fs::path repl = arg.substr(eq + 1);
        if (!fs::exists(repl)) throw DataError("replacement file not found: " + repl.string());
        for (const auto& id : ids) {
          changed.insert(id);
          replacements[entity_file_path(g.node(id))] = repl;
        }
      }
      auto index = CausalIndex(g);
      auto rerun = plan_modified_repeat(changed, index);
      report["rerun"] = to_json(rerun);
      if (!rerun.procs_to_rerun.empty()) plan = plan_sub_container(rerun.procs_to_rerun, g, DescendantMode::Direct);
    } else if (!a.procs.empty()) {
      plan = plan_sub_container(detail::resolve_procs(g, detail::split_csv(a.procs)), g, mode);
    } else {
      plan = plan_full_repeat(g);
    }
    report["plan"] = to_json(plan);

    // Materialize the shipped inputs (with substitutions) into the work directory.
    std::set<std::string> wanted;
    for (const auto& id : plan.required_files) wanted.insert(entity_file_path(g.node(id)));
    for (const auto& [path, host] : replacements) wanted.erase(path);
    auto mat = ws_.store().materialize(m, work, wanted);
    for (const auto& [path, host] : replacements) {
      auto target = work / path;
      fs::create_directories(target.parent_path());
      fs::copy_file(host, target, fs::copy_options::overwrite_existing);
      mat.written.push_back(path);
    }
    report["workdir"] = work.string();
    report["materialized"] = mat.written;

    int code = kOk;
    if (a.execute && !plan.required_procs.empty()) {
      auto replay = simulate_replay(g, plan, [&](const std::string& id) {
        return fs::exists(fs::symlink_status(work / entity_file_path(g.node(id))));
      });
      auto verdict = verify_exact_repeat(replay.reference, replay.rerun);
      ContainerManifest rerun_m;
      rerun_m.sciunit = m.sciunit;
      rerun_m.parent = ContainerRef{m.sciunit, m.seq};
      rerun_m.meta["command"] = m.meta.count("command") ? m.meta.at("command") : "";
      rerun_m.meta["repeat_of"] = m.container_id();
      for (const auto& id : plan.required_files) {
        auto path = entity_file_path(g.node(id));
        if (auto it = m.files.find(path); it != m.files.end() && !replacements.count(path)) rerun_m.files[path] = it->second;
      }
      for (const auto& [path, host] : replacements) {
        auto bytes = provrepeat::detail::read_file_bytes(host);
        rerun_m.files[path] = ws_.store().put_bytes(bytes);
      }
      for (const auto& id : plan.regenerated_files) {
        auto path = entity_file_path(g.node(id));
        if (auto it = m.files.find(path); it != m.files.end() && !rerun_m.files.count(path)) rerun_m.files[path] = it->second;
      }
      rerun_m.provenance = replay.rerun;
      {
        auto lock = ws_.lock();
        rerun_m = ws_.store().add_manifest(std::move(rerun_m));
      }
      report["replay"] = {{"container", rerun_m.seq},
                          {"touched", replay.touched},
                          {"outside", replay.outside},
                          {"unused", replay.unused}};
      report["verdict"] = to_json(verdict);
      code = verdict.isomorphic && replay.outside.empty() ? kOk : kNotIsomorphic;
    }

    if (opts_.json) {
      out_ << report.dump(2) << "\n";
      return code;
    }
    if (report.contains("rerun")) {
      out_ << "changed:  " << detail::join(report["rerun"]["changed_inputs"].get<IdSet>()) << "\n";
      out_ << "rerun:    " << detail::join(report["rerun"]["procs_to_rerun"].get<IdSet>()) << "\n";
      out_ << "reused:   " << detail::join(report["rerun"]["entities_reused"].get<IdSet>()) << "\n";
    }
    out_ << "procs:    " << detail::join(plan.required_procs) << "\n";
    out_ << "files:    " << detail::join(plan.required_files) << "\n";
    out_ << "reused outputs: " << detail::join(plan.reused_outputs) << "\n";
    out_ << "regenerated:    " << detail::join(plan.regenerated_files) << "\n";
    out_ << "workdir:  " << work.string() << " (" << mat.written.size() << " files)\n";
    if (report.contains("verdict")) {
      out_ << "replay container: " << report["replay"]["container"].get<std::uint64_t>() << "\n";
      out_ << (code == kOk ? "isomorphic" : "NOT isomorphic") << "\n";
    }
    return code;
  }

  int verify(std::uint64_t a, std::uint64_t b) {
    auto ma = ws_.load(a);
    auto mb = ws_.load(b);
    auto v = verify_exact_repeat(ma.provenance, mb.provenance);
    if (opts_.json) {
      out_ << to_json(v).dump(2) << "\n";
    } else {
      out_ << (v.isomorphic ? "isomorphic" : "NOT isomorphic") << "\n";
      if (!v.isomorphic) {
        const auto& s = v.mismatch_summary;
        out_ << "  activity delta " << s.activity_delta << ", entity delta " << s.entity_delta << ", edge delta "
             << s.edge_delta << "\n";
        for (const auto& u : s.unmatched_signatures) out_ << "  " << u << "\n";
      }
    }
    return v.isomorphic ? kOk : kNotIsomorphic;
  }

  int summarize(std::optional<std::uint64_t> seq, const std::string& mode, const std::string& format,
                const std::string& output) {
    auto m = ws_.load(seq);
    std::string text;
    if (mode == "collapse") {
      auto s = collapse_pipeline(m.provenance);
      text = format == "dot" ? export_dot(s) : to_json(s).dump(2) + "\n";
    } else {
      auto gr = ancestry_degree_grouping(m.provenance, mode == "ancestry-only" ? GroupingMode::AncestryOnly
                                                                                : GroupingMode::AncestryDegree);
      text = format == "dot" ? export_dot(m.provenance, gr) : to_json(gr).dump(2) + "\n";
    }
    if (output.empty() || output == "-") out_ << text;
    else detail::write_text(output, text);
    return kOk;
  }

  int stats(std::optional<std::uint64_t> seq) {
    auto m = ws_.load(seq);
    const auto& g = m.provenance;
    nlohmann::ordered_json j;
    j["original"] = detail::graph_stats(g);
    auto s = collapse_pipeline(g);
    j["collapse"] = to_json(summary_stats(g, s));
    j["collapse"]["max_click_depth"] = s.max_click_depth();
    if (detect_cycles(g, 1).acyclic()) j["ancestry"] = to_json(summary_stats(g, ancestry_degree_grouping(g)));
    else j["ancestry"] = nullptr;
    if (opts_.json) {
      out_ << j.dump(2) << "\n";
      return kOk;
    }
    out_ << "original: " << j["original"]["activities"] << " processes, " << j["original"]["entities"]
         << " files, " << j["original"]["edges"] << " edges\n";
    out_ << std::fixed << std::setprecision(1);
    for (const char* k : {"collapse", "ancestry"}) {
      if (j[k].is_null()) {
        out_ << k << ": skipped (cyclic graph)\n";
        continue;
      }
      out_ << k << ": files -" << j[k]["file_node_reduction"].get<double>() << "%, processes -"
           << j[k]["process_node_reduction"].get<double>() << "%, edges -" << j[k]["edge_reduction"].get<double>()
           << "%, combined -" << j[k]["combined_reduction"].get<double>() << "%\n";
    }
    return kOk;
  }

  int export_archive(std::optional<std::uint64_t> seq, const std::string& file) {
    auto m = ws_.load(seq);
    export_container(ws_.store(), m, file);
    if (opts_.json) out_ << nlohmann::json{{"exported", m.container_id()}, {"archive", file}}.dump() << "\n";
    else out_ << "exported " << m.container_id() << " to " << file << "\n";
    return kOk;
  }

  int import_archive(const std::string& file, const std::string& as) {
    auto lock = ws_.lock();
    std::string target = as.empty() ? ws_.current() : as;
    if (!target.empty() && !fs::exists(ws_.store().sciunit_dir(target))) ws_.create(target);
    auto m = import_container(ws_.store(), file, target);
    if (ws_.current().empty()) ws_.select(m.sciunit);
    if (opts_.json) out_ << nlohmann::json{{"imported", m.container_id()}}.dump() << "\n";
    else out_ << "imported as " << m.container_id() << "\n";
    return kOk;
  }

  int gc() {
    auto lock = ws_.lock();
    auto r = ws_.store().gc();
    if (opts_.json)
      out_ << nlohmann::json{{"removed_chunks", r.removed_chunks}, {"removed_bytes", r.removed_bytes}}.dump() << "\n";
    else out_ << "removed " << r.removed_chunks << " chunks (" << r.removed_bytes << " bytes)\n";
    return kOk;
  }

 private:
  ExecutionTrace run_capture(const std::vector<std::string>& argv) {
#ifdef __linux__
    if (std::system("command -v strace >/dev/null 2>&1") != 0)
      throw DataError("--capture needs strace on PATH");
    auto log = ws_.root() / ("capture-" + std::to_string(::getpid()) + ".strace");
    std::string cmd = "strace -f -ttt -qq -e trace=open,openat,creat,close,execve,fork,vfork,clone,clone3 -o '" +
                      log.string() + "' --";
    for (const auto& a : argv) {
      std::string quoted;
      for (char c : a) quoted += c == '\'' ? std::string("'\\''") : std::string(1, c);
      cmd += " '" + quoted + "'";
    }
    int rc = std::system(cmd.c_str());
    auto text = detail::read_text(log);
    fs::remove(log);
    if (rc != 0) err_ << "warning: captured command exited with status " << rc << "\n";
    StraceOptions so;
    so.cwd = fs::current_path().string();
    return parse_strace(text, so);
#else
    (void)argv;
    throw DataError("--capture is only supported on Linux");
#endif
  }

  Options opts_;
  std::ostream& out_;
  std::ostream& err_;
  Workspace ws_;
};

/// Entry point shared by the executable and the tests.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"provrepeat: audit, package, repeat and summarize computational runs"};
  app.require_subcommand(1);
  app.fallthrough();
  Options opts;
  app.add_option("--home", opts.home, "Workspace directory (default $PROVREPEAT_HOME or ~/.provrepeat)");
  app.add_flag("--json", opts.json, "Machine-readable output");

  std::string name, file, output, as, mode = "collapse", format = "json", root;
  std::optional<std::uint64_t> seq;
  std::uint64_t seq_a = 0, seq_b = 0;
  bool version_files = false, strace_input = false;
  std::vector<std::string> capture;
  Commands::RepeatArgs rep;

  auto* create = app.add_subcommand("create", "Create a sciunit and make it current");
  create->add_option("name", name)->required();
  auto* list = app.add_subcommand("list", "List containers of the current sciunit");
  auto* show = app.add_subcommand("show", "Show one container (default: latest)");
  show->add_option("seq", seq);
  auto* exec = app.add_subcommand("exec", "Package a traced run as a new container");
  exec->add_option("trace", file, "Trace log (JSON lines, or strace output with --strace)");
  exec->add_option("--root", root, "Resolve traced file paths under this directory");
  exec->add_flag("--version-files", version_files, "Split files written more than once into versions");
  exec->add_flag("--strace", strace_input, "Input is `strace -f -ttt` output");
  exec->add_option("--capture", capture, "Run and trace a command with strace (Linux)")->expected(-1);
  auto* ingest = app.add_subcommand("ingest-strace", "Convert strace output to a trace log");
  ingest->add_option("log", file)->required();
  ingest->add_option("-o,--output", output);
  auto* repeat = app.add_subcommand("repeat", "Plan (and optionally replay) a repeat");
  repeat->add_option("seq", rep.seq)->required();
  repeat->add_option("--procs", rep.procs, "Processes to re-run (ids, pids or labels)");
  repeat->add_option("--given", rep.given, "Substitute an input: path=replacement");
  repeat->add_option("--descendants", rep.descendants)->check(CLI::IsMember({"direct", "all"}));
  repeat->add_flag("--execute", rep.execute, "Replay the plan and verify the result");
  repeat->add_option("--workdir", rep.workdir, "Directory to materialize the plan into");
  auto* verify = app.add_subcommand("verify", "Check two containers for provenance isomorphism");
  verify->add_option("seq_a", seq_a)->required();
  verify->add_option("seq_b", seq_b)->required();
  auto* summarize = app.add_subcommand("summarize", "Summarize a container's provenance");
  summarize->add_option("seq", seq);
  summarize->add_option("--mode", mode)->check(CLI::IsMember({"collapse", "ancestry", "ancestry-only"}));
  summarize->add_option("--format", format)->check(CLI::IsMember({"dot", "json"}));
  summarize->add_option("-o,--output", output);
  auto* stats = app.add_subcommand("stats", "Summary reduction statistics for both modes");
  stats->add_option("seq", seq);
  auto* exp = app.add_subcommand("export", "Write a container to a self-contained archive");
  exp->add_option("seq", seq);
  exp->add_option("-o,--output", file)->required();
  auto* imp = app.add_subcommand("import", "Load a container archive");
  imp->add_option("archive", file)->required();
  imp->add_option("--as", as, "Target sciunit (default: current)");
  auto* gc = app.add_subcommand("gc", "Delete chunks no container references");

  std::vector<std::string> argv_store{"provrepeat"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    Commands c(opts, out, err);
    if (*create) return c.create(name);
    if (*list) return c.list();
    if (*show) return c.show(seq);
    if (*exec) {
      if (file.empty() == capture.empty()) throw UsageError("exec needs exactly one of <trace> or --capture");
      return c.exec(file, root, version_files, strace_input, capture);
    }
    if (*ingest) return c.ingest_strace(file, output);
    if (*repeat) {
      if (!rep.given.empty() && !rep.procs.empty()) throw UsageError("--given and --procs are exclusive");
      return c.repeat(rep);
    }
    if (*verify) return c.verify(seq_a, seq_b);
    if (*summarize) return c.summarize(seq, mode, format, output);
    if (*stats) return c.stats(seq);
    if (*exp) return c.export_archive(seq, file);
    if (*imp) return c.import_archive(file, as);
    if (*gc) return c.gc();
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsage;
}

}  // namespace provrepeat::cli
