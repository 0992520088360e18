import { ApiClient } from "./api.js";
import { App } from "./app.js";

function meta(name: string): string | undefined {
  const tag = document.querySelector<HTMLMetaElement>(`meta[name="${name}"]`);
  return tag?.content || undefined;
}

const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app mount point");
}

new App(root, new ApiClient({
  baseUrl: meta("api-base") ?? "",
  token: meta("api-token"),
}));
