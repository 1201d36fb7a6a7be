#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "prefprog/api/server.hpp"
#include "prefprog/dsl/evaluator.hpp"
#include "prefprog/dsl/syntax.hpp"
#include "prefprog/error.hpp"
#include "prefprog/eval/reorder.hpp"
#include "prefprog/eval/synthetic.hpp"
#include "prefprog/io.hpp"
#include "prefprog/library/store.hpp"
#include "prefprog/orchestrator/session.hpp"
#include "prefprog/synthesis/scripted_lm.hpp"

namespace fs = std::filesystem;
using namespace prefprog;

namespace {

struct Providers {
  std::string lm = "scripted";
  std::string lm_script;
  std::string prompts;
  std::string perception = "scripted";

  std::unique_ptr<synthesis::LmProvider> lm_provider;
  std::unique_ptr<scene::PerceptionProvider> perception_provider;

  void open() {
    auto data = io::default_data_dir();
    if (lm == "scripted") {
      lm_provider = std::make_unique<synthesis::ScriptedLmProvider>(synthesis::ScriptedLmProvider::from_file(
          lm_script.empty() ? data / "scripted_lm.json" : fs::path(lm_script)));
    } else {
      lm_provider = std::make_unique<synthesis::HttpLmProvider>(
          synthesis::HttpLmProvider::from_environment(prompts.empty() ? data / "prompts" : fs::path(prompts)));
    }
    if (perception == "scripted") {
      perception_provider = std::make_unique<scene::ScriptedPerception>();
    } else {
      perception_provider = std::make_unique<scene::HttpPerception>(scene::HttpPerception::from_env());
    }
  }
};

struct LearnFlags {
  std::string aux_mode = "explanation";
  std::string synth_mode = "two-stage";
  std::string glossary;
  int max_queries = 5;
  int max_depth = 3;
};

void add_learn_flags(CLI::App* cmd, LearnFlags& f) {
  cmd->add_option("--aux-mode", f.aux_mode, "How unknown predicates are taught")
      ->check(CLI::IsMember({"explanation", "demonstrations"}));
  cmd->add_option("--synth-mode", f.synth_mode, "Sketch synthesis mode")
      ->check(CLI::IsMember({"two-stage", "direct", "code-as-policies"}));
  cmd->add_option("--glossary", f.glossary, "JSON object mapping predicate names to explanations")
      ->check(CLI::ExistingFile);
  cmd->add_option("--max-queries", f.max_queries, "Questions per auxiliary predicate");
  cmd->add_option("--max-depth", f.max_depth, "Nesting limit for auxiliary predicates");
}

orchestrator::LearnOptions learn_options(const LearnFlags& f) {
  orchestrator::LearnOptions o;
  o.aux_mode = f.aux_mode == "demonstrations" ? orchestrator::AuxMode::kDemonstrations
                                               : orchestrator::AuxMode::kExplanationOnly;
  o.mode = synthesis::synth_mode_from_name(f.synth_mode);
  o.max_queries = f.max_queries;
  o.max_depth = f.max_depth;
  return o;
}

std::unique_ptr<orchestrator::UserChannel> glossary_channel(const std::string& path) {
  if (path.empty()) return nullptr;
  return std::make_unique<orchestrator::GlossaryChannel>(
      io::read_json(path).get<std::map<std::string, std::string>>());
}

dsl::LabelSet parse_labels(const std::string& csv) {
  if (csv.empty()) return dsl::LabelSet::binary();
  std::vector<std::string> labels;
  std::stringstream in(csv);
  for (std::string l; std::getline(in, l, ',');) labels.push_back(l);
  return dsl::LabelSet(labels);
}

orchestrator::LearningSession open_session(const fs::path& dir, const std::string& labels, const std::string& library) {
  if (fs::exists(dir / "session.json")) return orchestrator::load_session(dir);
  auto lib = library.empty() ? library::ConceptLibrary() : library::load_library(library);
  return orchestrator::new_session(dir.filename().string(), parse_labels(labels), lib);
}

void print_program(const orchestrator::LearningSession& s) {
  std::cout << (s.program ? dsl::print_program(s.program->sketch()) : std::string("(no program yet)")) << "\n";
}

// Program text plus library, from a session directory or explicit files.
std::pair<dsl::Program, library::ConceptLibrary> load_program(const std::string& session, const std::string& program,
                                                              const std::string& library) {
  if (!session.empty()) {
    auto s = orchestrator::load_session(session);
    if (!s.program) throw Error(ErrorCode::kUnboundHole, "session has no program yet");
    return {*s.program, s.library};
  }
  if (program.empty()) throw Error(ErrorCode::kSchema, "pass --session or --program");
  auto text = io::read_text(program);
  auto lib = library.empty() ? library::ConceptLibrary() : library::load_library(library);
  return {dsl::Program::from_sketch(dsl::parse_program(text)), lib};
}

void write_or_print(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    io::write_text(path, text);
  }
}

int run_repl(orchestrator::LearningSession session, const fs::path& dir, const fs::path& scene_path,
             const Providers& p, const LearnFlags& flags) {
  auto scene = std::make_shared<const scene::Scene>(scene::load_scene(scene_path));
  orchestrator::StdioChannel channel(std::cin, std::cout, scene);
  orchestrator::Learner learner{*p.lm_provider, *p.perception_provider, &channel, learn_options(flags)};
  std::cout << "scene " << scene->id << " (" << scene->height << "x" << scene->width << ")\n"
            << "enter '<row> <col> <label> <explanation>', 'program', 'mask' or 'quit'\n";
  std::string line;
  while (std::cout << "demo> " << std::flush, std::getline(std::cin, line)) {
    if (line.empty()) continue;
    if (line == "quit" || line == "exit") break;
    if (line == "program") {
      print_program(session);
      continue;
    }
    if (line == "mask") {
      if (!session.program) {
        std::cout << "(no program yet)\n";
        continue;
      }
      auto mask = dsl::evaluate_mask(*session.program, *scene, session.library, *p.perception_provider);
      for (int r = 0; r < mask.height; ++r) {
        for (int c = 0; c < mask.width; ++c) std::cout << mask.labels[r * mask.width + c][0];
        std::cout << "\n";
      }
      continue;
    }
    std::istringstream in(line);
    int row = 0, col = 0;
    std::string label, explanation;
    if (!(in >> row >> col >> label)) {
      std::cout << "expected '<row> <col> <label> <explanation>'\n";
      continue;
    }
    std::getline(in >> std::ws, explanation);
    try {
      auto demo = params::make_demonstration(scene, {{{row, col}, label}}, explanation);
      session = orchestrator::learn(session, demo, learner);
      orchestrator::save_session(session, dir);
      print_program(session);
    } catch (const Error& e) {
      std::cout << "error " << error_code_name(e.code()) << ": " << e.what() << "\n";
    }
  }
  return 0;
}

api::ApiServer* g_server = nullptr;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learn spatial preference programs from labeled demonstrations and explanations"};
  app.require_subcommand(1);
  Providers providers;
  app.add_option("--lm", providers.lm, "Language model backend")->check(CLI::IsMember({"scripted", "http"}));
  app.add_option("--lm-script", providers.lm_script, "Scripted model file (default: data/scripted_lm.json)");
  app.add_option("--prompts", providers.prompts, "Prompt template directory for --lm http");
  app.add_option("--perception", providers.perception, "Perception backend")
      ->check(CLI::IsMember({"scripted", "http"}));

  // generate
  auto* gen = app.add_subcommand("generate", "Write a synthetic experiment (scenes, masks, manifest, demos)");
  eval::ExperimentConfig gen_cfg;
  std::string gen_out;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--seed", gen_cfg.seed, "Random seed");
  gen->add_option("--demos", gen_cfg.demos, "Training demonstrations");
  gen->add_option("--in-test", gen_cfg.in_test, "In-distribution test scenes");
  gen->add_option("--out-test", gen_cfg.out_test, "Out-of-distribution test scenes");
  gen->add_option("--noisy", gen_cfg.noisy, "Mislabeled demonstrations");
  bool gen_glossary = false;
  gen->add_flag("--glossary", gen_glossary, "Also write glossary.json with auxiliary explanations");

  // learn
  auto* learn = app.add_subcommand("learn", "Add demonstrations to a session directory");
  std::string session_dir, demos_dir, labels, library_dir;
  std::vector<std::string> demo_files;
  LearnFlags learn_flags;
  bool interactive = false;
  learn->add_option("--session", session_dir, "Session directory (created when missing)")->required();
  learn->add_option("--demos", demos_dir, "Directory of demonstration JSON files")->check(CLI::ExistingDirectory);
  learn->add_option("--demo", demo_files, "Demonstration JSON file")->check(CLI::ExistingFile);
  learn->add_option("--labels", labels, "Comma-separated labels for a new session");
  learn->add_option("--library", library_dir, "Seed library directory for a new session");
  learn->add_flag("--interactive", interactive, "Ask about unknown predicates on the terminal");
  add_learn_flags(learn, learn_flags);

  // repl
  auto* repl = app.add_subcommand("repl", "Teach a session interactively on one scene");
  std::string repl_scene;
  repl->add_option("--session", session_dir, "Session directory")->required();
  repl->add_option("--scene", repl_scene, "Scene JSON file")->required()->check(CLI::ExistingFile);
  repl->add_option("--labels", labels, "Comma-separated labels for a new session");
  repl->add_option("--library", library_dir, "Seed library directory for a new session");
  add_learn_flags(repl, learn_flags);

  // eval
  auto* ev = app.add_subcommand("eval", "Score a program on a labeled dataset");
  std::string program_file, dataset, csv_out, json_out;
  eval::EvalOptions eval_opts;
  bool no_cache = false;
  ev->add_option("--session", session_dir, "Session directory holding the program");
  ev->add_option("--program", program_file, "Program text file");
  ev->add_option("--library", library_dir, "Library directory for --program");
  ev->add_option("--dataset", dataset, "Dataset manifest")->required()->check(CLI::ExistingFile);
  ev->add_option("--workers", eval_opts.workers, "Parallel workers");
  ev->add_flag("--no-cache", no_cache, "Disable the per-scene feature cache");
  ev->add_option("--csv", csv_out, "CSV report path ('-' for stdout)");
  ev->add_option("--json", json_out, "JSON report path ('-' for stdout)");

  // reorder-study
  auto* reorder = app.add_subcommand("reorder-study", "Performance bands over demonstration orderings");
  eval::ReorderOptions reorder_opts;
  std::string reorder_csv;
  reorder->add_option("--dataset", dataset, "Held-out dataset manifest")->required()->check(CLI::ExistingFile);
  reorder->add_option("--demos", demos_dir, "Directory of demonstration JSON files")
      ->required()
      ->check(CLI::ExistingDirectory);
  reorder->add_option("--library", library_dir, "Seed library directory");
  reorder->add_option("--permutations", reorder_opts.permutations, "Number of orderings");
  reorder->add_option("--seed", reorder_opts.seed, "Shuffle seed");
  reorder->add_option("--workers", reorder_opts.eval.workers, "Parallel workers for scoring");
  reorder->add_option("--csv", reorder_csv, "CSV output path ('-' for stdout)");
  add_learn_flags(reorder, learn_flags);

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  api::ServerConfig server_cfg;
  std::string scenes_dir, sessions_root;
  serve->add_option("--host", server_cfg.host, "Bind address")->envname("PREFPROG_HOST");
  serve->add_option("--port", server_cfg.port, "Port (0 picks a free one)")->envname("PREFPROG_PORT");
  serve->add_option("--scenes", scenes_dir, "Directory of scene JSON files")->check(CLI::ExistingDirectory);
  serve->add_option("--sessions-root", sessions_root, "Persist sessions under this directory");
  serve->add_option("--timeout", server_cfg.learn_timeout_seconds, "Seconds allowed per learning request");
  serve->add_option("--cors-origin", server_cfg.cors_origin, "Access-Control-Allow-Origin value");

  // library
  auto* lib_cmd = app.add_subcommand("library", "Inspect a concept library");
  lib_cmd->require_subcommand(1);
  auto add_source = [&](CLI::App* c) {
    c->add_option("--session", session_dir, "Session directory");
    c->add_option("--library", library_dir, "Library directory");
  };
  auto* lib_list = lib_cmd->add_subcommand("list", "List entities and predicates");
  add_source(lib_list);
  auto* lib_show = lib_cmd->add_subcommand("show", "Print one predicate with its history");
  std::string concept_name;
  lib_show->add_option("name", concept_name, "Predicate name")->required();
  add_source(lib_show);
  auto* lib_export = lib_cmd->add_subcommand("export", "Copy the library to a directory");
  std::string export_dir;
  lib_export->add_option("dir", export_dir, "Target directory")->required();
  add_source(lib_export);

  CLI11_PARSE(app, argc, argv);

  try {
    providers.open();
    const auto& lm = *providers.lm_provider;
    const auto& perception = *providers.perception_provider;

    if (*gen) {
      auto ex = eval::generate_experiment(gen_cfg);
      eval::write_experiment(ex, gen_out);
      if (gen_glossary) {
        nlohmann::ordered_json g = nlohmann::ordered_json::object();
        for (const auto& [k, v] : eval::auxiliary_explanations()) g[k] = v;
        io::write_json(fs::path(gen_out) / "glossary.json", g);
      }
      std::cout << "wrote " << ex.demos.size() << " demonstrations and " << ex.dataset.entries.size()
                << " scenes to " << gen_out << "\n";
      return 0;
    }

    if (*learn) {
      auto session = open_session(session_dir, labels, library_dir);
      std::vector<params::Demonstration> demos;
      if (!demos_dir.empty()) demos = eval::load_demos(demos_dir);
      for (const auto& f : demo_files) demos.push_back(params::demo_from_json(io::read_json(f)));
      std::unique_ptr<orchestrator::UserChannel> channel;
      if (interactive) {
        channel = std::make_unique<orchestrator::StdioChannel>(std::cin, std::cout);
      } else {
        channel = glossary_channel(learn_flags.glossary);
      }
      orchestrator::Learner learner{lm, perception, channel.get(), learn_options(learn_flags)};
      for (const auto& d : demos) {
        session = orchestrator::learn(session, d, learner);
        orchestrator::save_session(session, session_dir);
      }
      orchestrator::save_session(session, session_dir);
      std::cout << "demonstrations: " << session.demos.size() << "\n";
      if (session.solve) {
        std::cout << "satisfied weight: " << session.solve->satisfied_weight << " of " << session.solve->total_weight
                  << "\n";
      }
      print_program(session);
      return 0;
    }

    if (*repl) {
      return run_repl(open_session(session_dir, labels, library_dir), session_dir, repl_scene, providers, learn_flags);
    }

    if (*ev) {
      auto [program, lib] = load_program(session_dir, program_file, library_dir);
      eval_opts.use_cache = !no_cache;
      auto report = eval::evaluate_dataset(program, eval::load_manifest(dataset), lib, perception, eval_opts);
      if (csv_out.empty() && json_out.empty()) csv_out = "-";
      if (!csv_out.empty()) write_or_print(csv_out, eval::report_csv(report));
      if (!json_out.empty()) write_or_print(json_out, eval::report_json(report).dump(2) + "\n");
      return report.failures == 0 ? 0 : 3;
    }

    if (*reorder) {
      auto lib = library_dir.empty() ? library::ConceptLibrary() : library::load_library(library_dir);
      auto channel = glossary_channel(learn_flags.glossary);
      orchestrator::Learner learner{lm, perception, channel.get(), learn_options(learn_flags)};
      auto data = eval::load_manifest(dataset).only({eval::Split::kInTest, eval::Split::kOutTest});
      auto bands = eval::reorder_study(orchestrator::new_session("reorder", dsl::LabelSet::binary(), lib),
                                       eval::load_demos(demos_dir), data, learner, reorder_opts);
      write_or_print(reorder_csv.empty() ? "-" : reorder_csv, eval::bands_csv(bands));
      return 0;
    }

    if (*serve) {
      server_cfg.scenes_dir = scenes_dir;
      if (!sessions_root.empty()) server_cfg.sessions_dir = fs::path(sessions_root);
      api::ApiServer server(lm, perception, server_cfg);
      int port = server.bind();
      g_server = &server;
      std::signal(SIGINT, [](int) {
        if (g_server) g_server->stop();
      });
      std::signal(SIGTERM, [](int) {
        if (g_server) g_server->stop();
      });
      std::cerr << "listening on " << server_cfg.host << ":" << port << "\n";
      server.listen();
      g_server = nullptr;
      return 0;
    }

    if (*lib_cmd) {
      library::ConceptLibrary lib;
      if (!session_dir.empty()) {
        lib = orchestrator::load_session(session_dir).library;
      } else if (!library_dir.empty()) {
        lib = library::load_library(library_dir);
      } else {
        throw Error(ErrorCode::kSchema, "pass --session or --library");
      }
      if (*lib_list) {
        std::cout << "entities:";
        for (const auto& e : lib.entities()) std::cout << " " << e;
        std::cout << "\npredicates:\n";
        for (const auto& name : lib.topological_order()) {
          const auto& c = lib.lookup_predicate(name);
          std::cout << "  " << c.name << " v" << c.version << " (";
          for (std::size_t i = 0; i < c.params.size(); ++i) {
            std::cout << (i ? ", " : "") << c.params[i].name << ":" << library::kind_name(c.params[i].kind);
          }
          std::cout << ")\n";
        }
      } else if (*lib_show) {
        for (const auto& c : lib.history(concept_name)) {
          std::cout << c.name << " v" << c.version << " created " << c.created_at << "\n  "
                    << dsl::print_program(c.body.sketch()) << "\n";
          if (!c.provenance.empty()) {
            std::cout << "  from:";
            for (const auto& d : c.provenance) std::cout << " " << d;
            std::cout << "\n";
          }
        }
      } else {
        library::save_library(lib, export_dir);
        std::cout << "exported to " << export_dir << "\n";
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << nlohmann::json{{"error", {{"code", error_code_name(e.code())}, {"message", e.what()}}}}.dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", {{"code", "internal"}, {"message", e.what()}}}}.dump() << "\n";
    return 2;
  }
  return 0;
}
