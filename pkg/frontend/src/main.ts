import { ServiceClient } from "./api.js";
import { ConsoleApp } from "./ui.js";

// API base URL is injectable at deploy time: `window.SYMDX_API_BASE` may be
// set by a <script> tag before this module loads; same-origin by default.
declare global {
  interface Window {
    SYMDX_API_BASE?: string;
  }
}

const api = new ServiceClient(window.SYMDX_API_BASE ?? "");
void new ConsoleApp(api).init();
