#include "cana/cana_c.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <new>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "cana/harness.hpp"

struct cana_session {
  std::string last_error;
};

namespace {

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out != nullptr) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

cana_session* cana_session_new(void) {
  return new (std::nothrow) cana_session();
}

void cana_session_free(cana_session* session) { delete session; }

const char* cana_version(void) { return cana::harness::kVersion; }

const char* cana_last_error(const cana_session* session) {
  return session == nullptr ? "" : session->last_error.c_str();
}

cana_status cana_run(cana_session* session, const char* command,
                     const char* options_json, char** result_json) {
  if (result_json != nullptr) *result_json = nullptr;
  if (session == nullptr) return CANA_ERR_INVALID_ARGUMENT;
  session->last_error.clear();
  if (command == nullptr || result_json == nullptr) {
    session->last_error = "command and result_json must be non-null";
    return CANA_ERR_INVALID_ARGUMENT;
  }
  try {
    nlohmann::ordered_json options = nlohmann::ordered_json::object();
    if (options_json != nullptr && options_json[0] != '\0')
      options = nlohmann::ordered_json::parse(options_json);
    nlohmann::ordered_json result =
        cana::harness::run_command(command, options);
    *result_json = dup_string(result.dump(2));
    if (*result_json == nullptr) {
      session->last_error = "out of memory";
      return CANA_ERR_INTERNAL;
    }
    return CANA_OK;
  } catch (const nlohmann::json::exception& e) {
    session->last_error = std::string("json: ") + e.what();
    return CANA_ERR_INVALID_ARGUMENT;
  } catch (const std::invalid_argument& e) {
    session->last_error = e.what();
    return CANA_ERR_INVALID_ARGUMENT;
  } catch (const std::ios_base::failure& e) {
    session->last_error = e.what();
    return CANA_ERR_IO;
  } catch (const std::runtime_error& e) {
    session->last_error = e.what();
    return CANA_ERR_RUNTIME;
  } catch (const std::exception& e) {
    session->last_error = e.what();
    return CANA_ERR_INTERNAL;
  }
}

void cana_string_free(char* s) { std::free(s); }

}  // extern "C"
