/** Bootstrap: resolve the service base URL and mount the app. */

import { FhirlitApi } from "./api.js";
import { SessionStore } from "./state.js";
import { App } from "./views.js";

function baseUrl(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("service");
  if (fromQuery) {
    window.localStorage.setItem("fhirlit.service", fromQuery);
  }
  return (
    fromQuery ??
    window.localStorage.getItem("fhirlit.service") ??
    "http://localhost:8000"
  );
}

const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app container");
}
const api = new FhirlitApi(baseUrl());
const app = new App(root, api, new SessionStore(api));
app.render();
