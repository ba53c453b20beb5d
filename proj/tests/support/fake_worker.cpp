// Test double for the sandbox worker. Speaks the JSONL protocol on
// stdin/stdout; behaviour is driven by `#fw <directive> [arg]` lines inside
// the submitted program text.

#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "funsearch/capset.hpp"
#include "funsearch/construction.hpp"
#include "funsearch/noiso.hpp"
#include "funsearch/priority.hpp"

using nlohmann::json;
namespace k = funsearch::kernels;

namespace {

std::map<std::string, std::string> directives(const std::string& program) {
  std::map<std::string, std::string> out;
  std::istringstream in(program);
  for (std::string line; std::getline(in, line);) {
    const auto pos = line.find("#fw ");
    if (pos == std::string::npos) continue;
    std::string rest = line.substr(pos + 4);
    const auto space = rest.find(' ');
    const std::string key = rest.substr(0, space);
    out.emplace(key, space == std::string::npos ? "" : rest.substr(space + 1));
  }
  return out;
}

void spin(int ms) {
  volatile double sink = 0;
  const auto until = std::chrono::steady_clock::now() + std::chrono::milliseconds(ms);
  while (std::chrono::steady_clock::now() < until) {
    for (int i = 0; i < 1000; ++i) sink = sink + i * 0.5;
  }
}

}  // namespace

int main(int argc, char** argv) {
  json flags = json::object();
  for (int i = 1; i + 1 < argc; i += 2) flags[std::string(argv[i]).substr(2)] = argv[i + 1];

  for (std::string line; std::getline(std::cin, line);) {
    json req;
    try {
      req = json::parse(line);
    } catch (const json::parse_error&) {
      std::cout << json{{"id", nullptr}, {"ok", false}, {"results", json::array()}, {"error", "bad-request"},
                        {"stderr_tail", ""}}
                       .dump()
                << std::endl;
      continue;
    }
    const std::string id = req.value("id", "");
    const auto d = directives(req.value("program", ""));
    const json inputs = req.value("inputs", json::array());

    if (d.count("sleep_ms")) std::this_thread::sleep_for(std::chrono::milliseconds(std::stoi(d.at("sleep_ms"))));
    if (d.count("spin_ms")) spin(std::stoi(d.at("spin_ms")));
    if (d.count("hang")) {
      for (;;) std::this_thread::sleep_for(std::chrono::seconds(1));
    }
    if (d.count("crash")) {
      std::cerr << "fatal: worker exploded on request " << id << std::endl;
      std::_Exit(3);
    }
    if (d.count("garbage")) {
      std::cout << "this is not json" << std::endl;
      continue;
    }
    if (d.count("write_file")) {
      std::ofstream(d.at("write_file")) << "scratch";
    }
    json resp = {{"id", d.count("wrong_id") ? id + "-other" : id}, {"stderr_tail", ""}};
    if (d.count("raise")) {
      resp["ok"] = false;
      resp["results"] = json::array();
      resp["error"] = d.at("raise").empty() ? "ZeroDivisionError: division by zero" : d.at("raise");
      std::cout << resp.dump() << std::endl;
      continue;
    }
    if (d.count("nan")) {
      std::string text = resp.dump();
      text.pop_back();
      text += ",\"ok\":true,\"error\":null,\"results\":[";
      for (std::size_t i = 0; i < inputs.size(); ++i) text += std::string(i ? "," : "") + "{\"score\":NaN,\"construction\":null}";
      std::cout << text << "]}" << std::endl;
      continue;
    }
    json results = json::array();
    const double lie = d.count("lie") ? std::stod(d.at("lie")) : 0.0;
    for (const auto& input : inputs) {
      json r = {{"score", 1.0}, {"construction", nullptr}};
      if (d.count("score")) r["score"] = std::stod(d.at("score"));
      if (d.count("score_input")) r["score"] = input.get<double>();
      if (d.count("construction")) r["construction"] = json::parse(d.at("construction"));
      if (d.count("capset")) {
        const auto c = k::capset_greedy_solve(input.get<int>(), k::PriorityOracle::random(std::stoull(d.at("capset"))));
        r["score"] = static_cast<double>(c.size());
        r["construction"] = funsearch::to_json(c);
      }
      if (d.count("noiso")) {
        const auto s = k::noiso_greedy_solve(input.get<int>(), k::PriorityOracle::random(std::stoull(d.at("noiso"))));
        r["score"] = static_cast<double>(s.points.size());
        r["construction"] = funsearch::to_json(s);
      }
      if (d.count("table")) {
        const int n = input.get<int>();
        json values = json::array();
        for (int x = 0; x < n; ++x) {
          for (int y = 0; y < n; ++y) values.push_back({x, y, static_cast<double>(x * n + y)});
        }
        r["score"] = n * n;
        r["construction"] = {{"kind", "priority_table"}, {"n", n}, {"values", values}};
      }
      if (d.count("flags")) {
        r["construction"] = {{"flags", flags}, {"cwd", std::filesystem::current_path().string()}};
      }
      if (d.count("pid")) r["construction"] = {{"pid", static_cast<long>(getpid())}};
      r["score"] = r["score"].get<double>() + lie;
      results.push_back(r);
    }
    resp["ok"] = true;
    resp["error"] = nullptr;
    resp["results"] = results;
    if (d.count("stderr")) {
      std::cerr << d.at("stderr") << std::endl;
      resp["stderr_tail"] = d.at("stderr");
    }
    std::cout << resp.dump() << std::endl;
  }
  return 0;
}
