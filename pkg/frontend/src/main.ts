import { ApiClient } from "./api.js";
import { App } from "./app.js";

// Served from /ui on the artifact service itself, or pointed at a remote
// service with ?api=http://host:port
const params = new URLSearchParams(window.location.search);
const base = params.get("api") ?? "";
const app = new App(document.getElementById("app") as HTMLElement,
                    new ApiClient(base));
void app.start().catch((error) => {
  const node = document.createElement("pre");
  node.textContent = `failed to start: ${error}`;
  document.body.appendChild(node);
});
